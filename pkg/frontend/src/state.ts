import type { ApiClient } from "./api.js";
import type { PanelState, Viewport } from "./types.js";

export const MIN_ZOOM = 0;
export const MAX_ZOOM = 8;

export function emptyState(): PanelState {
  return {
    patches: [],
    curve: [],
    meta: null,
    selectedId: null,
    hoveredId: null,
    viewport: { centerLon: 0, centerLat: 0, zoom: MIN_ZOOM },
    error: null,
  };
}

/** Fetch patches, curve, and meta; no selection afterwards. */
export async function load(api: ApiClient): Promise<PanelState> {
  const state = emptyState();
  try {
    const [patches, curve, meta] = await Promise.all([
      api.getPatches(),
      api.getCurve(),
      api.getMeta(),
    ]);
    state.patches = patches;
    state.curve = curve;
    state.meta = meta;
    const [lonMin, latMin, lonMax, latMax] = meta.bounds;
    state.viewport = {
      centerLon: (lonMin + lonMax) / 2,
      centerLat: (latMin + latMax) / 2,
      zoom: MIN_ZOOM,
    };
  } catch (err) {
    state.error = err instanceof Error ? err.message : String(err);
  }
  return state;
}

/**
 * Set the shared selection. Unknown ids are ignored so the map, curve, and
 * triptych can never disagree about what is selected.
 */
export function selectPatch(state: PanelState, id: string | null): PanelState {
  if (id !== null && !state.patches.some((p) => p.id === id)) {
    return state;
  }
  if (id === state.selectedId) {
    return state;
  }
  return { ...state, selectedId: id };
}

export function setViewport(state: PanelState, viewport: Viewport): PanelState {
  const zoom = Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, viewport.zoom));
  return { ...state, viewport: { ...viewport, zoom } };
}

export function patchIdFromQuery(search: string): string | null {
  return new URLSearchParams(search).get("patch");
}

export function queryForSelection(id: string | null): string {
  return id === null ? "" : `?patch=${encodeURIComponent(id)}`;
}
