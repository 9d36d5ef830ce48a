import type { PatchInfo } from "./types.js";

export interface Cluster {
  /** mean position of the members */
  lon: number;
  lat: number;
  ids: string[];
}

export const CLUSTER_RADIUS_PX = 28;

/**
 * Greedy radius clustering in screen space. `pxPerDegree` is the current map
 * scale, so the same markers collapse when zoomed out and split apart when
 * zoomed in; no external clustering library keeps the dependency surface at
 * zero for the built bundle.
 */
export function clusterMarkers(
  patches: PatchInfo[],
  pxPerDegree: number,
  radiusPx: number = CLUSTER_RADIUS_PX,
): Cluster[] {
  const clusters: Cluster[] = [];
  // deterministic seeding order: curve-independent, id-sorted
  const sorted = [...patches].sort((a, b) => a.id.localeCompare(b.id));
  for (const p of sorted) {
    let home: Cluster | null = null;
    for (const c of clusters) {
      const dx = (p.lon - c.lon) * pxPerDegree;
      const dy = (p.lat - c.lat) * pxPerDegree;
      if (Math.hypot(dx, dy) <= radiusPx) {
        home = c;
        break;
      }
    }
    if (home === null) {
      clusters.push({ lon: p.lon, lat: p.lat, ids: [p.id] });
    } else {
      const n = home.ids.length;
      home.lon = (home.lon * n + p.lon) / (n + 1);
      home.lat = (home.lat * n + p.lat) / (n + 1);
      home.ids.push(p.id);
    }
  }
  return clusters;
}

/** Bounding box of a cluster's members, for click-to-zoom. */
export function clusterExtent(
  cluster: Cluster,
  patches: PatchInfo[],
): [number, number, number, number] {
  const members = patches.filter((p) => cluster.ids.includes(p.id));
  const lons = members.map((p) => p.lon);
  const lats = members.map((p) => p.lat);
  return [
    Math.min(...lons),
    Math.min(...lats),
    Math.max(...lons),
    Math.max(...lats),
  ];
}
