import type { ApiClient } from "./api.js";
import type { PanelState } from "./types.js";

const PANES: Array<[string, (api: ApiClient, id: string) => string]> = [
  ["image", (api, id) => api.imageUrl(id)],
  ["mask", (api, id) => api.maskUrl(id)],
  ["prediction", (api, id) => api.predUrl(id)],
];

/**
 * The three linked views for the selected patch, plus an optional fourth pane
 * cycling through probability panels and activation grids (off by default to
 * keep the classic three-view layout).
 */
export class TriptychView {
  readonly root: HTMLElement;
  private api: ApiClient;
  private panes: HTMLElement;
  private extraToggle: HTMLInputElement;
  private extraSelect: HTMLSelectElement;
  private state: PanelState | null = null;

  constructor(container: HTMLElement, api: ApiClient) {
    this.api = api;
    this.root = document.createElement("div");
    this.root.className = "triptych";
    this.panes = document.createElement("div");
    this.panes.className = "triptych-panes";

    const controls = document.createElement("label");
    this.extraToggle = document.createElement("input");
    this.extraToggle.type = "checkbox";
    this.extraToggle.addEventListener("change", () => this.rerender());
    this.extraSelect = document.createElement("select");
    this.extraSelect.addEventListener("change", () => this.rerender());
    controls.append(this.extraToggle, "detail pane", this.extraSelect);

    this.root.append(this.panes, controls);
    container.appendChild(this.root);
  }

  render(state: PanelState) {
    this.state = state;
    this.extraSelect.replaceChildren();
    if (state.meta) {
      for (const cls of state.meta.classes) {
        const opt = document.createElement("option");
        opt.value = `prob:${cls}`;
        opt.textContent = `probability ${cls}`;
        this.extraSelect.appendChild(opt);
      }
      for (const layer of state.meta.layers) {
        const opt = document.createElement("option");
        opt.value = `act:${layer}`;
        opt.textContent = `activations ${layer}`;
        this.extraSelect.appendChild(opt);
      }
    }
    this.rerender();
  }

  private rerender() {
    this.panes.replaceChildren();
    const state = this.state;
    if (!state || state.selectedId === null) {
      const note = document.createElement("p");
      note.className = "triptych-empty";
      note.textContent = "select a patch on the map or the curve";
      this.panes.appendChild(note);
      return;
    }
    const id = state.selectedId;
    for (const [title, urlOf] of PANES) {
      this.panes.appendChild(this.pane(title, urlOf(this.api, id)));
    }
    if (this.extraToggle.checked && this.extraSelect.value) {
      const [kind, name] = this.extraSelect.value.split(":", 2);
      const url =
        kind === "prob"
          ? this.api.probUrl(id, name)
          : this.api.activationUrl(id, name);
      this.panes.appendChild(this.pane(name, url));
    }
  }

  private pane(title: string, url: string): HTMLElement {
    const fig = document.createElement("figure");
    fig.className = "pane";
    const img = document.createElement("img");
    img.src = url;
    img.alt = title;
    img.addEventListener("error", () => {
      const missing = document.createElement("p");
      missing.className = "pane-missing";
      missing.textContent = `not available: ${url}`;
      img.replaceWith(missing);
    });
    const caption = document.createElement("figcaption");
    caption.textContent = title;
    fig.append(img, caption);
    return fig;
  }
}
