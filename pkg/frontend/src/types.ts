export interface PatchInfo {
  id: string;
  lon: number;
  lat: number;
  split: string;
  accuracy: number;
}

export interface CurvePoint {
  rank: number;
  id: string;
  accuracy: number;
}

export interface Meta {
  /** [lon_min, lat_min, lon_max, lat_max] of the evaluated scene */
  bounds: [number, number, number, number];
  palette: Record<string, [number, number, number]>;
  layers: string[];
  classes: string[];
}

export interface Viewport {
  centerLon: number;
  centerLat: number;
  zoom: number;
}

export interface PanelState {
  patches: PatchInfo[];
  curve: CurvePoint[];
  meta: Meta | null;
  selectedId: string | null;
  hoveredId: string | null;
  viewport: Viewport;
  error: string | null;
}
