// Rendering tests over the frozen journey payload produced by the
// platform's golden fixture (scripts/run_golden_fixture.py --journey-out).

import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import type { Journey } from "../src/api.js";
import {
  renderJourney,
  renderProductForm,
  renderProductList,
  renderSegmentDetail,
  renderSegmentTable,
} from "../src/views.js";

const golden: Journey = JSON.parse(
  readFileSync(new URL("./fixtures/golden_journey.json", import.meta.url), "utf-8"),
);

describe("journey rendering (golden fixture)", () => {
  it("renders all four segments", () => {
    const html = renderSegmentTable(golden, 0);
    const rows = html.match(/<tr data-segment=/g) ?? [];
    expect(rows.length).toBe(4);
    expect(html).toContain(">warehouse<");
    expect(html).toContain(">vehicle<");
  });

  it("shows the silo mean byte-for-byte from the payload", () => {
    const silo = golden.segments[1];
    const payloadMean = silo.stats.temperature.mean; // the raw decimal string
    const html = renderSegmentDetail(silo, "temperature");
    expect(html).toContain(`<dd class="stat-mean">${payloadMean}</dd>`);
    // sanity: the payload value is the expected storage temperature
    expect(Math.abs(parseFloat(payloadMean) - 15.0)).toBeLessThan(0.1);
  });

  it("renders device counts and the open check-out", () => {
    const html = renderSegmentTable(golden, 0);
    expect(html).toContain("still here"); // retail segment has no check-out
    const journeyHtml = renderJourney(golden, 1, "temperature");
    expect(journeyHtml).toContain("Journey of Extra Virgin Olive Oil 1L");
  });

  it("hides the chart and shows a placeholder when no devices contributed", () => {
    const production = golden.segments[0];
    expect(production.device_count).toBe(0);
    const html = renderSegmentDetail(production, null);
    expect(html).toContain("No sensor data");
    expect(html).not.toContain("<svg");
  });

  it("draws the min/avg/max chart for instrumented segments", () => {
    const html = renderSegmentDetail(golden.segments[1], "temperature");
    expect(html).toContain('svg class="chart"');
    expect(html).toContain("chart-avg");
  });
});

describe("journey edge states", () => {
  it("renders the unregistered-product marker", () => {
    const journey: Journey = { ...golden, registered: false, product: null };
    expect(renderJourney(journey)).toContain("Unregistered product");
  });

  it("renders the empty-journey state", () => {
    const journey: Journey = { ...golden, segments: [] };
    const html = renderJourney(journey);
    expect(html).toContain("No recorded events");
  });

  it("renders violation badges from the payload's violations field", () => {
    const segment = {
      ...golden.segments[1],
      violations: [
        { parameter: "temperature", bound: "max" as const, limit: "25.0", observed: "30.0" },
      ],
    };
    const journey: Journey = { ...golden, segments: [segment] };
    const html = renderSegmentTable(journey, 0);
    expect(html).toContain("temperature above limit");
    expect(html).toContain("limit 25.0, observed 30.0");
  });
});

describe("product views", () => {
  it("lists products and offers creation to producers only", () => {
    const products = [
      { id: "p1", name: "Oil", origin: "Crete", description: "", units: [] },
    ];
    expect(renderProductList(products, true)).toContain("show-product-form");
    expect(renderProductList(products, false)).not.toContain("show-product-form");
  });

  it("renders inline field errors", () => {
    const html = renderProductForm({ _global: "validation_error: name required" });
    expect(html).toContain("validation_error: name required");
  });

  it("escapes html in data", () => {
    const products = [
      { id: "p1", name: "<script>alert(1)</script>", origin: "", description: "" },
    ];
    const html = renderProductList(products, false);
    expect(html).not.toContain("<script>alert");
    expect(html).toContain("&lt;script&gt;");
  });
});
