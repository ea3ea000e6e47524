// Mount layer: wires the pure views to the DOM, owns navigation state, and
// polls the journey view for fresh data. All rendering goes through
// views.ts; all data goes through api.ts.

import { ApiClient, ApiError, Journey, LatestOnly } from "./api.js";
import { Session } from "./session.js";
import {
  renderJourney,
  renderLogin,
  renderProductForm,
  renderProductList,
  renderTraceForm,
} from "./views.js";

const root = document.getElementById("app") as HTMLElement;
const api = new ApiClient();
const session = new Session();
const journeyGuard = new LatestOnly();

let pollIntervalMs = 30_000;
let pollTimer: number | undefined;
let currentJourney: Journey | null = null;
let currentEpc = "";
let selectedSegment = 0;
let selectedParameter: string | null = null;

function setView(html: string): void {
  root.innerHTML = html;
}

function requireSession(): boolean {
  const state = session.load();
  if (!state || session.isExpired(state)) {
    session.clear();
    showLogin(state ? "Session expired, sign in again." : undefined);
    return false;
  }
  api.token = state.token;
  return true;
}

function showLogin(error?: string): void {
  stopPolling();
  setView(renderLogin(error));
  const form = document.getElementById("login-form") as HTMLFormElement;
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const data = new FormData(form);
    try {
      const token = await api.login(String(data.get("name")), String(data.get("password")));
      const who = await api.validate();
      if (who.status !== "Confirmed" || !who.principal) {
        showLogin("Authentication failed.");
        return;
      }
      session.save({ token: token.token, principal: who.principal, expiresAt: token.expires_at });
      showHome();
    } catch (error) {
      showLogin(error instanceof ApiError ? error.envelope.message : String(error));
    }
  });
}

async function showHome(): Promise<void> {
  if (!requireSession()) return;
  stopPolling();
  const state = session.load()!;
  const canCreate = session.canCreateProducts(state);
  let productsHtml = "";
  try {
    const listing = await api.listProducts();
    productsHtml = renderProductList(listing.products, canCreate);
  } catch (error) {
    if (error instanceof ApiError && error.status === 401) return void showLogin();
    productsHtml = `<section class="card"><p class="error">${String(error)}</p></section>`;
  }
  setView(productsHtml + renderTraceForm(currentEpc));
  document
    .getElementById("show-product-form")
    ?.addEventListener("click", () => showProductForm());
  wireTraceForm();
}

function showProductForm(fieldErrors: Record<string, string> = {}): void {
  setView(renderProductForm(fieldErrors) + renderTraceForm(currentEpc));
  wireTraceForm();
  const form = document.getElementById("product-form") as HTMLFormElement;
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const name = String(data.get("name") ?? "").trim();
    try {
      // create -> units -> monitoring, in order
      const product = await api.createProduct({
        name,
        gtin_base: {
          company_prefix: String(data.get("company_prefix") ?? ""),
          item_reference: String(data.get("item_reference") ?? ""),
        },
        description: String(data.get("description") ?? ""),
        origin: String(data.get("origin") ?? ""),
        ingredients: String(data.get("ingredients") ?? ""),
        optimum_usage: String(data.get("optimum_usage") ?? ""),
      });
      const serials = String(data.get("serials") ?? "")
        .split(",")
        .map((s) => s.trim())
        .filter(Boolean);
      const lot = String(data.get("lot") ?? "").trim();
      if (serials.length > 0) {
        await api.createUnits(product.id, { level: "instance", serials });
      } else if (lot) {
        await api.createUnits(product.id, {
          level: "batch",
          lot,
          quantity: Number(data.get("quantity") ?? 0),
        });
      }
      const monitored = data.getAll("monitor").map(String);
      if (monitored.length > 0) {
        await api.setMonitoring(product.id, monitored);
      }
      showHome();
    } catch (error) {
      if (error instanceof ApiError) {
        showProductForm({ _global: `${error.envelope.code}: ${error.envelope.message}` });
      } else {
        showProductForm({ _global: String(error) });
      }
    }
  });
}

function wireTraceForm(): void {
  const form = document.getElementById("trace-form") as HTMLFormElement | null;
  form?.addEventListener("submit", (event) => {
    event.preventDefault();
    const epc = String(new FormData(form).get("epc") ?? "").trim();
    if (epc) void showJourney(epc);
  });
}

async function showJourney(epc: string): Promise<void> {
  if (!requireSession()) return;
  currentEpc = epc;
  selectedSegment = 0;
  selectedParameter = null;
  await refreshJourney();
  startPolling();
}

async function refreshJourney(): Promise<void> {
  const ticket = journeyGuard.issue();
  try {
    const journey = await api.trace(currentEpc);
    if (!journeyGuard.isCurrent(ticket)) return; // stale response discarded
    currentJourney = journey;
    renderCurrentJourney();
  } catch (error) {
    if (!journeyGuard.isCurrent(ticket)) return;
    if (error instanceof ApiError && error.status === 401) return void showLogin();
    setView(
      `<section class="card"><p class="error">${
        error instanceof ApiError ? error.envelope.message : String(error)
      }</p></section>` + renderTraceForm(currentEpc),
    );
    wireTraceForm();
  }
}

function renderCurrentJourney(): void {
  if (!currentJourney) return;
  setView(renderTraceForm(currentEpc) + renderJourney(currentJourney, selectedSegment, selectedParameter));
  wireTraceForm();
  root.querySelectorAll("tr[data-segment]").forEach((row) => {
    row.addEventListener("click", () => {
      selectedSegment = Number((row as HTMLElement).dataset.segment);
      selectedParameter = null;
      renderCurrentJourney();
    });
  });
  root.querySelectorAll("button[data-parameter]").forEach((tab) => {
    tab.addEventListener("click", () => {
      selectedParameter = (tab as HTMLElement).dataset.parameter ?? null;
      renderCurrentJourney();
    });
  });
}

function startPolling(): void {
  stopPolling();
  pollTimer = window.setInterval(() => void refreshJourney(), pollIntervalMs);
}

function stopPolling(): void {
  if (pollTimer !== undefined) {
    window.clearInterval(pollTimer);
    pollTimer = undefined;
  }
}

async function boot(): Promise<void> {
  try {
    const config = await api.uiConfig();
    pollIntervalMs = config.poll_interval_s * 1000;
  } catch {
    // defaults are fine when the config endpoint is unreachable
  }
  if (requireSession()) void showHome();
}

void boot();
