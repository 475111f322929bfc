// Rating session app: gallery of sampled Pareto networks with comparable
// objective bars, a detail view overlaying the candidate on the baseline,
// and 1-10 rating submission with progress tracking.

import {
  ApiError,
  fetchBaselineGeo,
  fetchNetworkGeo,
  fetchRatings,
  fetchSample,
  postRating,
  type NetworkGeo,
  type NetworkSummary,
  type SampleResponse,
} from "./api.js";
import {
  OBJECTIVES,
  RatingSession,
  deltaPct,
  formatObjective,
  objectiveBars,
} from "./model.js";
import { renderOverlay } from "./map.js";

const app = document.getElementById("app") as HTMLElement;

let sample: SampleResponse | null = null;
let session: RatingSession | null = null;
let baselineGeo: NetworkGeo | null = null;
let serverMeans: Record<string, { mean: number; count: number }> = {};
let selectedId: string | null = null;

function raterId(): string {
  const input = document.getElementById("rater-id") as HTMLInputElement | null;
  const value = input?.value.trim() || localStorage.getItem("rater_id") || "";
  if (value) localStorage.setItem("rater_id", value);
  return value;
}

function el(tag: string, cls?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function showError(message: string, retry: () => void): void {
  const banner = el("div", "error-banner");
  banner.append(el("span", "", message));
  const button = el("button", "retry", "Retry") as HTMLButtonElement;
  button.onclick = () => {
    banner.remove();
    retry();
  };
  banner.append(button);
  app.prepend(banner);
}

function progressLine(): string {
  if (!session) return "";
  const snap = session.snapshot();
  return `${snap.rated} / ${snap.total} networks rated`;
}

function renderHeader(): HTMLElement {
  const header = el("header");
  header.append(el("h1", "", "Network rating session"));
  const sub = el("p", "sub");
  sub.textContent =
    "Candidate bus networks sampled along the Pareto front. Compare against " +
    "the current network and rate each from 1 (poor) to " +
    `${sample?.max_rating ?? 10} (excellent).`;
  header.append(sub);
  const rater = el("div", "rater-row");
  rater.append(el("label", "", "Rater id: "));
  const input = el("input") as HTMLInputElement;
  input.id = "rater-id";
  input.placeholder = "your name";
  input.value = localStorage.getItem("rater_id") ?? "";
  rater.append(input);
  const progress = el("span", "progress");
  progress.id = "progress";
  progress.textContent = progressLine();
  rater.append(progress);
  header.append(rater);
  return header;
}

function ratingControl(network: NetworkSummary): HTMLElement {
  const wrap = el("div", "rating-control");
  const max = sample?.max_rating ?? 10;
  for (let value = 1; value <= max; value++) {
    const btn = el("button", "rate-btn", String(value)) as HTMLButtonElement;
    if (session?.ratingOf(network.network_id) === value) {
      btn.classList.add("current");
    }
    btn.onclick = async (ev) => {
      ev.stopPropagation();
      const rater = raterId();
      if (!rater) {
        showError("enter a rater id before rating", () => undefined);
        return;
      }
      try {
        const ack = await postRating(network.network_id, rater, value);
        session?.record(network.network_id, value);
        localStorage.setItem(`rating:${rater}:${network.network_id}`, String(value));
        serverMeans[ack.network_id] = { mean: ack.mean, count: ack.count };
        render();
      } catch (err) {
        const msg = err instanceof ApiError ? err.message : String(err);
        showError(msg, () => btn.click());
      }
    };
    wrap.append(btn);
  }
  return wrap;
}

function card(network: NetworkSummary): HTMLElement {
  const node = el("article", "card");
  if (network.network_id === selectedId) node.classList.add("selected");
  const title = el("div", "card-title");
  title.append(el("strong", "", network.network_id));
  title.append(el("span", "muted", ` ${network.route_count} routes`));
  const stored = serverMeans[network.network_id];
  if (stored) {
    title.append(el("span", "mean-badge", `mean ${stored.mean.toFixed(2)} (${stored.count})`));
  }
  node.append(title);

  if (sample) {
    const bars = el("div", "bars");
    for (const bar of objectiveBars(network, sample.bounds)) {
      const row = el("div", "bar-row");
      row.append(el("span", "bar-label", bar.label));
      const track = el("div", "bar-track");
      const fill = el("div", "bar-fill");
      fill.style.width = `${(bar.frac * 100).toFixed(1)}%`;
      track.append(fill);
      row.append(track);
      row.append(el("span", "bar-value", formatObjective(bar.key, bar.value)));
      bars.append(row);
    }
    node.append(bars);
  }
  node.append(ratingControl(network));
  node.onclick = () => {
    selectedId = network.network_id;
    render();
    void renderDetail(network);
  };
  return node;
}

async function renderDetail(network: NetworkSummary): Promise<void> {
  const panel = document.getElementById("detail");
  if (!panel) return;
  panel.textContent = "loading map…";
  try {
    const geo = await fetchNetworkGeo(network.network_id);
    if (baselineGeo === null) {
      try {
        baselineGeo = await fetchBaselineGeo();
      } catch {
        baselineGeo = null; // synthetic runs may omit the baseline overlay
      }
    }
    panel.innerHTML = "";
    panel.append(el("h2", "", `${network.network_id} vs baseline`));
    const mapBox = el("div", "map-box");
    mapBox.innerHTML = renderOverlay(baselineGeo, geo);
    panel.append(mapBox);

    const table = el("table", "delta-table");
    const head = el("tr");
    for (const text of ["objective", "candidate", "baseline", "delta"]) {
      head.append(el("th", "", text));
    }
    table.append(head);
    const baseObjectives = baselineGeo?.properties?.objectives;
    for (const { key, label } of OBJECTIVES) {
      const row = el("tr");
      row.append(el("td", "", label));
      row.append(el("td", "", formatObjective(key, network.objectives[key])));
      if (baseObjectives) {
        const baseVal = baseObjectives[key];
        row.append(el("td", "", formatObjective(key, baseVal)));
        const d = deltaPct(network.objectives[key], baseVal);
        const cell = el("td", "", d === null ? "n/a" : `${d >= 0 ? "+" : ""}${d.toFixed(1)}%`);
        if (d !== null) cell.className = d <= 0 ? "better" : "worse";
        row.append(cell);
      } else {
        row.append(el("td", "muted", "–"));
        row.append(el("td", "muted", "–"));
      }
      table.append(row);
    }
    panel.append(table);
    const legend = el("p", "legend");
    legend.innerHTML =
      '<span class="swatch baseline"></span> baseline ' +
      '<span class="swatch candidate"></span> candidate ' +
      '<span class="swatch fixed"></span> fixed tram';
    panel.append(legend);
  } catch (err) {
    panel.textContent = "";
    const msg = err instanceof ApiError ? err.message : String(err);
    showError(msg, () => void renderDetail(network));
  }
}

function render(): void {
  if (!sample || !session) return;
  app.innerHTML = "";
  app.append(renderHeader());
  const snap = session.snapshot();
  if (snap.complete) {
    const done = el("div", "complete-banner");
    done.append(el("strong", "", "Session complete. "));
    done.append(
      el(
        "span",
        "",
        "All sampled networks are rated; the ratings file is ready for weight fitting.",
      ),
    );
    app.append(done);
  }
  const layout = el("div", "layout");
  const gallery = el("section", "gallery");
  for (const network of sample.networks) {
    gallery.append(card(network));
  }
  layout.append(gallery);
  const detail = el("section", "detail");
  detail.id = "detail";
  detail.textContent = "Select a network to inspect it on the map.";
  layout.append(detail);
  app.append(layout);
  const progress = document.getElementById("progress");
  if (progress) progress.textContent = progressLine();
}

async function boot(): Promise<void> {
  try {
    sample = await fetchSample(9);
    session = new RatingSession(
      sample.networks.map((n) => n.network_id),
      sample.max_rating,
    );
    const ratings = await fetchRatings();
    serverMeans = ratings.networks;
    const mine = raterId();
    if (mine) {
      // restore this rater's completed work from local storage only; the
      // server aggregate is authoritative for means
      for (const id of session.networkIds) {
        const saved = localStorage.getItem(`rating:${mine}:${id}`);
        if (saved) session.record(id, Number(saved));
      }
    }
    render();
  } catch (err) {
    const msg = err instanceof ApiError ? err.message : String(err);
    showError(`failed to load the sample: ${msg}`, () => void boot());
  }
}

void boot();
