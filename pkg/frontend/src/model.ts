// View-model logic kept free of the DOM so it can be unit tested: objective
// bar normalization against shared archive-wide bounds, rating session
// progress, and per-rater idempotent rating state.

import type {
  NetworkSummary,
  ObjectiveBounds,
  ObjectiveName,
} from "./api.js";

export const OBJECTIVES: { key: ObjectiveName; label: string; unit: string }[] = [
  { key: "total_length_m", label: "Total length", unit: "km" },
  { key: "unsatisfied_demand", label: "Unsatisfied demand", unit: "%" },
  { key: "in_vehicle_time_s", label: "In-vehicle time", unit: "pax·h" },
  { key: "transfers_per_passenger", label: "Transfers / passenger", unit: "" },
];

export function normalizeObjective(value: number, bounds: ObjectiveBounds): number {
  const span = bounds.max - bounds.min;
  if (!(span > 0)) return 0;
  const frac = (value - bounds.min) / span;
  return Math.min(1, Math.max(0, frac));
}

export interface Bar {
  key: ObjectiveName;
  label: string;
  value: number;
  frac: number; // 0 = archive minimum, 1 = archive maximum
}

export function objectiveBars(
  network: NetworkSummary,
  bounds: Record<ObjectiveName, ObjectiveBounds>,
): Bar[] {
  return OBJECTIVES.map(({ key, label }) => ({
    key,
    label,
    value: network.objectives[key],
    frac: normalizeObjective(network.objectives[key], bounds[key]),
  }));
}

export function formatObjective(key: ObjectiveName, value: number): string {
  switch (key) {
    case "total_length_m":
      return `${(value / 1000).toFixed(1)} km`;
    case "unsatisfied_demand":
      return `${(value * 100).toFixed(1)} %`;
    case "in_vehicle_time_s":
      return `${(value / 3600).toFixed(1)} pax·h`;
    case "transfers_per_passenger":
      return value.toFixed(2);
  }
}

export function deltaPct(candidate: number, baseline: number): number | null {
  if (baseline === 0) return candidate === 0 ? 0 : null;
  return ((candidate - baseline) / baseline) * 100;
}

export interface SessionSnapshot {
  total: number;
  rated: number;
  complete: boolean;
}

/** Per-rater rating state; re-rating a network overwrites, mirroring the
 * server's last-write-wins aggregation keyed by (network, rater). */
export class RatingSession {
  private ratings = new Map<string, number>();

  constructor(
    readonly networkIds: string[],
    readonly maxRating: number,
  ) {}

  validate(rating: number): string | null {
    if (!Number.isInteger(rating)) return "rating must be an integer";
    if (rating < 1 || rating > this.maxRating) {
      return `rating must lie in [1, ${this.maxRating}]`;
    }
    return null;
  }

  record(networkId: string, rating: number): void {
    const problem = this.validate(rating);
    if (problem) throw new Error(problem);
    if (!this.networkIds.includes(networkId)) {
      throw new Error(`unknown network ${networkId}`);
    }
    this.ratings.set(networkId, rating);
  }

  ratingOf(networkId: string): number | undefined {
    return this.ratings.get(networkId);
  }

  snapshot(): SessionSnapshot {
    const rated = this.networkIds.filter((id) => this.ratings.has(id)).length;
    return {
      total: this.networkIds.length,
      rated,
      complete: rated === this.networkIds.length && this.networkIds.length > 0,
    };
  }
}
