// GeoJSON route overlays on a plain coordinate plane (no basemap): linear
// lon/lat projection into a fixed viewBox, baseline and candidate in
// distinct hues.

import type { GeoFeature, NetworkGeo } from "./api.js";

export interface Projection {
  x(lon: number): number;
  y(lat: number): number;
}

export const VIEW_W = 820;
export const VIEW_H = 620;
const PAD = 20;

export function fitProjection(collections: NetworkGeo[]): Projection {
  let minLon = Infinity;
  let maxLon = -Infinity;
  let minLat = Infinity;
  let maxLat = -Infinity;
  for (const fc of collections) {
    for (const f of fc.features) {
      for (const [lon, lat] of f.geometry.coordinates) {
        minLon = Math.min(minLon, lon);
        maxLon = Math.max(maxLon, lon);
        minLat = Math.min(minLat, lat);
        maxLat = Math.max(maxLat, lat);
      }
    }
  }
  const lonSpan = maxLon - minLon || 1e-9;
  const latSpan = maxLat - minLat || 1e-9;
  return {
    x: (lon) => PAD + ((lon - minLon) / lonSpan) * (VIEW_W - 2 * PAD),
    // screen y grows downward; latitude grows upward
    y: (lat) => PAD + ((maxLat - lat) / latSpan) * (VIEW_H - 2 * PAD),
  };
}

export function featurePoints(feature: GeoFeature, proj: Projection): string {
  return feature.geometry.coordinates
    .map(([lon, lat]) => `${proj.x(lon).toFixed(1)},${proj.y(lat).toFixed(1)}`)
    .join(" ");
}

export function renderOverlay(
  baseline: NetworkGeo | null,
  candidate: NetworkGeo,
): string {
  const layers = baseline ? [baseline, candidate] : [candidate];
  const proj = fitProjection(layers);
  const parts: string[] = [
    `<svg viewBox="0 0 ${VIEW_W} ${VIEW_H}" xmlns="http://www.w3.org/2000/svg" role="img">`,
  ];
  if (baseline) {
    for (const f of baseline.features) {
      parts.push(
        `<polyline points="${featurePoints(f, proj)}" class="route-baseline" fill="none"/>`,
      );
    }
  }
  for (const f of candidate.features) {
    const cls =
      f.properties["kind"] === "tram_fixed" ? "route-fixed" : "route-candidate";
    parts.push(
      `<polyline points="${featurePoints(f, proj)}" class="${cls}" fill="none"/>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}
