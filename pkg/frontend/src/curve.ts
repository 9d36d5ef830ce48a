import type { PanelState } from "./types.js";

const WIDTH = 480;
const HEIGHT = 180;
const PAD = 24;
const SVG_NS = "http://www.w3.org/2000/svg";

export interface CurveCallbacks {
  onSelect(id: string): void;
}

/** Accuracy curve: patches on the x-axis by ascending-accuracy rank. */
export class CurveView {
  readonly root: HTMLElement;
  private svg: SVGElement;
  private tooltip: HTMLElement;
  private callbacks: CurveCallbacks;

  constructor(container: HTMLElement, callbacks: CurveCallbacks) {
    this.callbacks = callbacks;
    this.root = document.createElement("div");
    this.root.className = "curve-view";
    this.svg = document.createElementNS(SVG_NS, "svg");
    this.svg.setAttribute("width", String(WIDTH));
    this.svg.setAttribute("height", String(HEIGHT));
    this.tooltip = document.createElement("div");
    this.tooltip.className = "curve-tooltip";
    this.root.appendChild(this.svg);
    this.root.appendChild(this.tooltip);
    container.appendChild(this.root);
  }

  render(state: PanelState) {
    this.svg.replaceChildren();
    const n = state.curve.length;
    if (n === 0) {
      this.tooltip.textContent = "no patches";
      return;
    }
    const x = (rank: number) =>
      n === 1 ? WIDTH / 2 : PAD + (rank / (n - 1)) * (WIDTH - 2 * PAD);
    const y = (acc: number) => HEIGHT - PAD - acc * (HEIGHT - 2 * PAD);

    const path = document.createElementNS(SVG_NS, "polyline");
    path.setAttribute(
      "points",
      state.curve.map((p) => `${x(p.rank)},${y(p.accuracy)}`).join(" "),
    );
    path.setAttribute("class", "curve-line");
    this.svg.appendChild(path);

    for (const point of state.curve) {
      const selected = state.selectedId === point.id;
      const dot = document.createElementNS(SVG_NS, "circle");
      dot.setAttribute("cx", String(x(point.rank)));
      dot.setAttribute("cy", String(y(point.accuracy)));
      dot.setAttribute("r", selected ? "7" : "5");
      dot.setAttribute("class", selected ? "curve-point selected" : "curve-point");
      dot.setAttribute("data-id", point.id);
      dot.setAttribute("data-rank", String(point.rank));
      dot.addEventListener("click", () => this.callbacks.onSelect(point.id));
      dot.addEventListener("mouseenter", () => {
        // accuracy shown verbatim from the service, never recomputed
        this.tooltip.textContent = `${point.id}: ${point.accuracy}`;
      });
      this.svg.appendChild(dot);
    }
  }
}
