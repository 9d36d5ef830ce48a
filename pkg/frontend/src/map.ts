import { Cluster, clusterExtent, clusterMarkers } from "./cluster.js";
import { MAX_ZOOM, MIN_ZOOM } from "./state.js";
import type { Meta, PanelState, Viewport } from "./types.js";

export interface MapCallbacks {
  onSelect(id: string): void;
  onViewportChange(viewport: Viewport): void;
}

const WIDTH = 480;
const HEIGHT = 360;
const SVG_NS = "http://www.w3.org/2000/svg";

function svgEl(tag: string, attrs: Record<string, string>): SVGElement {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, v);
  return el;
}

/** Pixels per degree of longitude at the current zoom. */
export function scaleFor(meta: Meta, zoom: number): number {
  const [lonMin, , lonMax] = meta.bounds;
  const span = Math.max(lonMax - lonMin, 1e-9);
  return (WIDTH / span) * Math.pow(2, zoom);
}

/**
 * Zoomable marker map. The basemap is a plain coordinate grid — a tile
 * provider can be slotted in by drawing under the markers, but the panel must
 * stay usable with no outside network at all.
 */
export class MapView {
  readonly root: HTMLElement;
  private svg: SVGElement;
  private callbacks: MapCallbacks;
  private state: PanelState | null = null;
  private dragFrom: { x: number; y: number; vp: Viewport } | null = null;

  constructor(container: HTMLElement, callbacks: MapCallbacks) {
    this.callbacks = callbacks;
    this.root = document.createElement("div");
    this.root.className = "map-view";
    this.svg = svgEl("svg", {
      width: String(WIDTH),
      height: String(HEIGHT),
      viewBox: `0 0 ${WIDTH} ${HEIGHT}`,
    });
    this.root.appendChild(this.svg);
    this.root.appendChild(this.zoomControls());
    this.wireDrag();
    container.appendChild(this.root);
  }

  private zoomControls(): HTMLElement {
    const bar = document.createElement("div");
    bar.className = "zoom-controls";
    for (const [label, delta] of [
      ["+", 1],
      ["−", -1],
    ] as const) {
      const btn = document.createElement("button");
      btn.textContent = label;
      btn.dataset.zoom = delta > 0 ? "in" : "out";
      btn.addEventListener("click", () => this.zoomBy(delta));
      bar.appendChild(btn);
    }
    return bar;
  }

  private zoomBy(delta: number) {
    if (!this.state) return;
    const vp = this.state.viewport;
    const zoom = Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, vp.zoom + delta));
    this.callbacks.onViewportChange({ ...vp, zoom });
  }

  private wireDrag() {
    this.svg.addEventListener("mousedown", (ev) => {
      if (!this.state) return;
      this.dragFrom = {
        x: (ev as MouseEvent).clientX,
        y: (ev as MouseEvent).clientY,
        vp: this.state.viewport,
      };
    });
    this.svg.addEventListener("mousemove", (ev) => {
      if (!this.dragFrom || !this.state || !this.state.meta) return;
      const scale = scaleFor(this.state.meta, this.dragFrom.vp.zoom);
      const me = ev as MouseEvent;
      this.callbacks.onViewportChange({
        ...this.dragFrom.vp,
        centerLon: this.dragFrom.vp.centerLon - (me.clientX - this.dragFrom.x) / scale,
        centerLat: this.dragFrom.vp.centerLat + (me.clientY - this.dragFrom.y) / scale,
      });
    });
    this.svg.addEventListener("mouseup", () => (this.dragFrom = null));
    this.svg.addEventListener("mouseleave", () => (this.dragFrom = null));
  }

  private toScreen(lon: number, lat: number): [number, number] {
    const state = this.state!;
    const scale = scaleFor(state.meta!, state.viewport.zoom);
    const x = WIDTH / 2 + (lon - state.viewport.centerLon) * scale;
    const y = HEIGHT / 2 - (lat - state.viewport.centerLat) * scale;
    return [x, y];
  }

  render(state: PanelState) {
    this.state = state;
    this.svg.replaceChildren();
    if (!state.meta) return;
    this.drawGrid();
    const scale = scaleFor(state.meta, state.viewport.zoom);
    for (const cluster of clusterMarkers(state.patches, scale)) {
      if (cluster.ids.length === 1) {
        this.drawMarker(cluster);
      } else {
        this.drawCluster(cluster);
      }
    }
  }

  private drawGrid() {
    const step = 40;
    for (let x = 0; x <= WIDTH; x += step) {
      this.svg.appendChild(
        svgEl("line", { x1: String(x), y1: "0", x2: String(x), y2: String(HEIGHT), class: "grid" }),
      );
    }
    for (let y = 0; y <= HEIGHT; y += step) {
      this.svg.appendChild(
        svgEl("line", { x1: "0", y1: String(y), x2: String(WIDTH), y2: String(y), class: "grid" }),
      );
    }
  }

  private drawMarker(cluster: Cluster) {
    const id = cluster.ids[0];
    const [x, y] = this.toScreen(cluster.lon, cluster.lat);
    const selected = this.state!.selectedId === id;
    const circle = svgEl("circle", {
      cx: String(x),
      cy: String(y),
      r: selected ? "8" : "6",
      class: selected ? "marker selected" : "marker",
      "data-id": id,
    });
    circle.addEventListener("click", () => this.callbacks.onSelect(id));
    this.svg.appendChild(circle);
  }

  private drawCluster(cluster: Cluster) {
    const [x, y] = this.toScreen(cluster.lon, cluster.lat);
    const g = svgEl("g", { class: "cluster", "data-count": String(cluster.ids.length) });
    g.appendChild(svgEl("circle", { cx: String(x), cy: String(y), r: "14" }));
    const label = svgEl("text", { x: String(x), y: String(y + 4), "text-anchor": "middle" });
    label.textContent = String(cluster.ids.length);
    g.appendChild(label);
    g.addEventListener("click", () => this.zoomToCluster(cluster));
    this.svg.appendChild(g);
  }

  private zoomToCluster(cluster: Cluster) {
    const state = this.state!;
    const [lonMin, latMin, lonMax, latMax] = clusterExtent(cluster, state.patches);
    this.callbacks.onViewportChange({
      centerLon: (lonMin + lonMax) / 2,
      centerLat: (latMin + latMax) / 2,
      zoom: Math.min(MAX_ZOOM, state.viewport.zoom + 2),
    });
  }
}
