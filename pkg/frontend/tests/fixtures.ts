import type { CurvePoint, Meta, PatchInfo } from "../src/types.js";

export const PATCHES: PatchInfo[] = [
  { id: "patch_0000", lon: 86.01, lat: 28.49, split: "train", accuracy: 0.91 },
  { id: "patch_0001", lon: 86.012, lat: 28.489, split: "test", accuracy: 0.42 },
  { id: "patch_0002", lon: 86.09, lat: 28.41, split: "test", accuracy: 0.77 },
];

export const CURVE: CurvePoint[] = [
  { rank: 0, id: "patch_0001", accuracy: 0.42 },
  { rank: 1, id: "patch_0002", accuracy: 0.77 },
  { rank: 2, id: "patch_0000", accuracy: 0.91 },
];

export const META: Meta = {
  bounds: [86.0, 28.4, 86.1, 28.5],
  palette: { "0": [128, 128, 128], "1": [31, 119, 255], "2": [44, 160, 44] },
  layers: ["enc.0.c1", "mid.c2"],
  classes: ["clean_ice", "debris", "background"],
};

/** fetch stub serving the three JSON endpoints from the fixtures above. */
export function fakeFetch(
  overrides: Partial<Record<string, unknown>> = {},
): typeof fetch {
  const routes: Record<string, unknown> = {
    "/api/patches": PATCHES,
    "/api/curve": CURVE,
    "/api/meta": META,
    ...overrides,
  };
  return async (input: RequestInfo | URL) => {
    const url = String(input);
    const path = Object.keys(routes).find((p) => url.endsWith(p));
    if (path === undefined) {
      return new Response("not found", { status: 404 });
    }
    return new Response(JSON.stringify(routes[path]), {
      status: 200,
      headers: { "content-type": "application/json" },
    });
  };
}
