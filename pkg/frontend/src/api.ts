// Typed client for the rating service JSON API. The UI never computes
// objectives itself; everything rendered comes from these responses.

export type ObjectiveName =
  | "total_length_m"
  | "unsatisfied_demand"
  | "in_vehicle_time_s"
  | "transfers_per_passenger";

export interface ObjectiveBounds {
  min: number;
  max: number;
}

export interface NetworkSummary {
  network_id: string;
  route_ids: number[];
  route_count: number;
  objectives: Record<ObjectiveName, number>;
}

export interface SampleResponse {
  max_rating: number;
  bounds: Record<ObjectiveName, ObjectiveBounds>;
  networks: NetworkSummary[];
}

export interface RatingAck {
  network_id: string;
  mean: number;
  count: number;
}

export interface RatingsResponse {
  max_rating: number;
  networks: Record<string, { mean: number; count: number }>;
}

export interface GeoFeature {
  type: "Feature";
  geometry: { type: "LineString"; coordinates: [number, number][] };
  properties: Record<string, unknown>;
}

export interface NetworkGeo {
  type: "FeatureCollection";
  features: GeoFeature[];
  properties?: {
    network_id: string;
    objectives: Record<ObjectiveName, number>;
    route_count: number;
  };
}

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

async function getJson<T>(url: string): Promise<T> {
  const res = await fetch(url);
  if (!res.ok) {
    throw new ApiError(`GET ${url} failed: ${res.status}`, res.status);
  }
  return (await res.json()) as T;
}

export function fetchSample(n = 9): Promise<SampleResponse> {
  return getJson<SampleResponse>(`/api/sample?n=${n}`);
}

export function fetchNetworkGeo(networkId: string): Promise<NetworkGeo> {
  return getJson<NetworkGeo>(`/api/network/${encodeURIComponent(networkId)}/geojson`);
}

export function fetchBaselineGeo(): Promise<NetworkGeo> {
  return getJson<NetworkGeo>("/api/baseline/geojson");
}

export function fetchRatings(): Promise<RatingsResponse> {
  return getJson<RatingsResponse>("/api/ratings");
}

export async function postRating(
  networkId: string,
  raterId: string,
  rating: number,
): Promise<RatingAck> {
  const res = await fetch("/api/ratings", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ network_id: networkId, rater_id: raterId, rating }),
  });
  if (res.status !== 201) {
    let detail = `${res.status}`;
    try {
      const body = await res.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // keep the status text
    }
    throw new ApiError(`rating rejected: ${detail}`, res.status);
  }
  return (await res.json()) as RatingAck;
}
