import { ApiClient } from "./api.js";
import { CurveView } from "./curve.js";
import { MapView } from "./map.js";
import {
  load,
  patchIdFromQuery,
  queryForSelection,
  selectPatch,
  setViewport,
} from "./state.js";
import { TriptychView } from "./triptych.js";
import type { PanelState, Viewport } from "./types.js";

export class App {
  state: PanelState;
  private api: ApiClient;
  private banner: HTMLElement;
  private notice: HTMLElement;
  private map: MapView;
  private curve: CurveView;
  private triptych: TriptychView;
  private loadToken = 0;

  constructor(container: HTMLElement, api: ApiClient = new ApiClient()) {
    this.api = api;
    this.state = {
      patches: [],
      curve: [],
      meta: null,
      selectedId: null,
      hoveredId: null,
      viewport: { centerLon: 0, centerLat: 0, zoom: 0 },
      error: null,
    };

    this.banner = document.createElement("div");
    this.banner.className = "error-banner";
    this.banner.hidden = true;
    const retry = document.createElement("button");
    retry.textContent = "retry";
    retry.className = "retry";
    retry.addEventListener("click", () => void this.reload());
    this.banner.appendChild(document.createElement("span"));
    this.banner.appendChild(retry);

    this.notice = document.createElement("p");
    this.notice.className = "notice";
    this.notice.hidden = true;

    container.append(this.banner, this.notice);
    this.map = new MapView(container, {
      onSelect: (id) => this.select(id),
      onViewportChange: (vp) => this.moveViewport(vp),
    });
    this.curve = new CurveView(container, { onSelect: (id) => this.select(id) });
    this.triptych = new TriptychView(container, api);
  }

  async reload(): Promise<void> {
    const token = ++this.loadToken;
    const next = await load(this.api);
    if (token !== this.loadToken) return; // superseded by a newer reload
    this.state = next;
    const wanted = patchIdFromQuery(window.location.search);
    if (wanted !== null) {
      this.state = selectPatch(this.state, wanted);
    }
    this.render();
  }

  select(id: string) {
    const next = selectPatch(this.state, id);
    if (next === this.state) return;
    this.state = next;
    window.history.replaceState(null, "", queryForSelection(id) || window.location.pathname);
    this.render();
  }

  private moveViewport(viewport: Viewport) {
    this.state = setViewport(this.state, viewport);
    this.render();
  }

  render() {
    const span = this.banner.querySelector("span")!;
    if (this.state.error !== null) {
      span.textContent = `service unavailable: ${this.state.error}`;
      this.banner.hidden = false;
    } else {
      this.banner.hidden = true;
    }
    this.notice.hidden = !(this.state.error === null && this.state.patches.length === 0);
    this.notice.textContent = "no patches";
    this.map.render(this.state);
    this.curve.render(this.state);
    this.triptych.render(this.state);
  }
}

export function mount(container: HTMLElement, api?: ApiClient): App {
  const app = new App(container, api);
  void app.reload();
  return app;
}

declare global {
  interface Window {
    __panelAutoMount?: boolean;
  }
}

if (typeof document !== "undefined" && window.__panelAutoMount !== false) {
  const host = document.getElementById("panel");
  if (host) mount(host);
}
