// Pure view rendering: every function maps data to an HTML string, which
// keeps all display logic testable without a DOM. The displayed statistics
// come verbatim from the API payload's decimal strings — nothing is
// reformatted or recomputed client-side.

import type { Journey, JourneySegment, ProductPayload } from "./api.js";
import { renderTrackMap, renderWindowChart } from "./charts.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderLogin(error?: string): string {
  return `
<section class="card login">
  <h2>Sign in</h2>
  ${error ? `<p class="error">${escapeHtml(error)}</p>` : ""}
  <form id="login-form">
    <label>Name <input name="name" required /></label>
    <label>Password <input name="password" type="password" required /></label>
    <button type="submit">Sign in</button>
  </form>
</section>`;
}

export function renderProductList(products: ProductPayload[], canCreate: boolean): string {
  const rows = products
    .map(
      (p) => `
    <tr data-product-id="${escapeHtml(p.id)}">
      <td>${escapeHtml(p.name)}</td>
      <td>${escapeHtml(p.origin)}</td>
      <td>${escapeHtml(p.description)}</td>
      <td>${p.units ? p.units.length : "&mdash;"}</td>
    </tr>`,
    )
    .join("");
  return `
<section class="card">
  <h2>Products</h2>
  <table class="products">
    <thead><tr><th>Name</th><th>Origin</th><th>Description</th><th>Units</th></tr></thead>
    <tbody>${rows || '<tr><td colspan="4" class="empty">No products yet</td></tr>'}</tbody>
  </table>
  ${canCreate ? '<button id="show-product-form">New product</button>' : ""}
</section>`;
}

export function renderProductForm(fieldErrors: Record<string, string> = {}): string {
  const err = (field: string) =>
    fieldErrors[field] ? `<span class="field-error">${escapeHtml(fieldErrors[field])}</span>` : "";
  return `
<section class="card">
  <h2>Register product</h2>
  <form id="product-form">
    <label>Name <input name="name" />${err("name")}</label>
    <label>Company prefix <input name="company_prefix" />${err("company_prefix")}</label>
    <label>Item reference <input name="item_reference" />${err("item_reference")}</label>
    <label>Description <input name="description" /></label>
    <label>Origin <input name="origin" /></label>
    <label>Ingredients <input name="ingredients" /></label>
    <label>Optimum usage <input name="optimum_usage" /></label>
    <fieldset>
      <legend>Units</legend>
      <label>Serials (comma-separated) <input name="serials" /></label>
      <label>or batch lot <input name="lot" /> quantity <input name="quantity" type="number" /></label>
    </fieldset>
    <fieldset>
      <legend>Monitor during the journey</legend>
      ${["temperature", "humidity", "ambient_light", "acceleration", "geolocation"]
        .map((p) => `<label class="inline"><input type="checkbox" name="monitor" value="${p}" /> ${p}</label>`)
        .join("")}
    </fieldset>
    <button type="submit">Create</button>
    <p class="form-status" id="product-form-status">${err("_global")}</p>
  </form>
</section>`;
}

function formatInterval(segment: JourneySegment): string {
  const checkOut = segment.check_out ? escapeHtml(segment.check_out) : "still here";
  return `${escapeHtml(segment.check_in)} &rarr; ${checkOut}`;
}

function violationBadges(segment: JourneySegment): string {
  return segment.violations
    .map(
      (v) =>
        `<span class="badge violation" title="limit ${escapeHtml(v.limit)}, observed ${escapeHtml(
          v.observed,
        )}">${escapeHtml(v.parameter)} ${v.bound === "max" ? "above" : "below"} limit</span>`,
    )
    .join(" ");
}

export function renderSegmentTable(journey: Journey, selected: number): string {
  const rows = journey.segments
    .map((segment, index) => {
      const marker = index === selected ? ' class="selected"' : "";
      return `
    <tr data-segment="${index}"${marker}>
      <td><span class="badge ${segment.location_type}">${segment.location_type}</span></td>
      <td class="mono">${escapeHtml(segment.location)}</td>
      <td>${formatInterval(segment)}</td>
      <td>${segment.device_count}</td>
      <td>${violationBadges(segment)}</td>
    </tr>`;
    })
    .join("");
  return `
  <table class="segments">
    <thead><tr><th>Type</th><th>Location</th><th>Interval</th><th>IoT devices</th><th></th></tr></thead>
    <tbody>${rows}</tbody>
  </table>`;
}

const UNIT_LABELS: Record<string, string> = {
  temperature: "degC",
  humidity: "%RH",
  ambient_light: "lux",
  acceleration: "m/s2",
};

export function renderSegmentDetail(segment: JourneySegment, selectedParameter: string | null): string {
  const parameters = Object.keys(segment.stats);
  if (segment.device_count === 0 || parameters.length === 0) {
    return '<p class="placeholder">No sensor data for this segment.</p>';
  }
  const parameter = selectedParameter && parameters.includes(selectedParameter)
    ? selectedParameter
    : parameters[0];
  const stats = segment.stats[parameter];
  const tabs = parameters
    .map(
      (p) =>
        `<button class="tab${p === parameter ? " active" : ""}" data-parameter="${p}">${p}</button>`,
    )
    .join("");
  const windows = stats.windows.map(([start, avg, min, max, count]) => ({
    start,
    avg,
    min,
    max,
    count,
  }));
  const chain = segment.containment_chain.length
    ? `<p class="chain">Inside: ${segment.containment_chain.map(escapeHtml).join(" &rarr; ")}</p>`
    : "";
  return `
  <div class="segment-detail">
    ${chain}
    <nav class="tabs">${tabs}</nav>
    <dl class="stats">
      <dt>Mean</dt><dd class="stat-mean">${escapeHtml(stats.mean)}</dd>
      <dt>Min</dt><dd class="stat-min">${escapeHtml(stats.min)}</dd>
      <dt>Max</dt><dd class="stat-max">${escapeHtml(stats.max)}</dd>
      <dt>Windows</dt><dd>${stats.sample_windows}</dd>
    </dl>
    ${renderWindowChart(windows, UNIT_LABELS[parameter] ?? parameter)}
    ${renderTrackMap(segment.track)}
  </div>`;
}

export function renderJourney(journey: Journey, selected = 0, selectedParameter: string | null = null): string {
  if (journey.segments.length === 0) {
    return `
<section class="card">
  <h2>Journey</h2>
  ${unregisteredMarker(journey)}
  <p class="placeholder">No recorded events for ${escapeHtml(journey.unit_id)} yet.</p>
</section>`;
  }
  const segment = journey.segments[Math.min(selected, journey.segments.length - 1)];
  const title = journey.product ? escapeHtml(journey.product.name) : escapeHtml(journey.unit_id);
  const warnings = journey.warnings.length
    ? `<p class="warnings">${journey.warnings.map(escapeHtml).join("<br/>")}</p>`
    : "";
  return `
<section class="card">
  <h2>Journey of ${title}</h2>
  ${unregisteredMarker(journey)}
  ${warnings}
  ${renderSegmentTable(journey, selected)}
  ${renderSegmentDetail(segment, selectedParameter)}
</section>`;
}

function unregisteredMarker(journey: Journey): string {
  if (journey.registered) return "";
  return '<p class="badge unregistered">Unregistered product: this EPC is not in the registry.</p>';
}

export function renderTraceForm(epc = ""): string {
  return `
<section class="card">
  <h2>Trace a unit</h2>
  <form id="trace-form">
    <label>EPC <input name="epc" class="mono" value="${escapeHtml(epc)}" placeholder="urn:epc:id:sgtin:..." /></label>
    <button type="submit">Trace</button>
  </form>
</section>`;
}
