import type { CurvePoint, Meta, PatchInfo } from "./types.js";

// All service access goes through GETs built here; the panel never issues
// anything that could mutate server state.
export class ApiClient {
  constructor(readonly base: string = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(this.base + path);
    if (!resp.ok) {
      throw new Error(`GET ${path} failed with ${resp.status}`);
    }
    return (await resp.json()) as T;
  }

  getPatches(): Promise<PatchInfo[]> {
    return this.getJson("/api/patches");
  }

  getCurve(): Promise<CurvePoint[]> {
    return this.getJson("/api/curve");
  }

  getMeta(): Promise<Meta> {
    return this.getJson("/api/meta");
  }

  imageUrl(id: string): string {
    return `${this.base}/api/patches/${id}/image.png`;
  }

  maskUrl(id: string): string {
    return `${this.base}/api/patches/${id}/mask.png`;
  }

  predUrl(id: string): string {
    return `${this.base}/api/patches/${id}/pred.png`;
  }

  probUrl(id: string, cls: string): string {
    return `${this.base}/api/patches/${id}/prob/${cls}.png`;
  }

  activationUrl(id: string, layer: string): string {
    return `${this.base}/api/patches/${id}/activations/${layer}.png`;
  }
}
