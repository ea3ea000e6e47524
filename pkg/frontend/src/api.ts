// Typed client for the platform's v1 REST API.
//
// Every request goes through request(), which records the (method, path
// template) pair it used; the contract test asserts the recorded traffic
// stays inside the documented surface. Statistics arrive as decimal strings
// and are passed through untouched — the UI never recomputes numbers.

export interface ErrorEnvelope {
  code: string;
  message: string;
  details?: unknown;
}

export class ApiError extends Error {
  status: number;
  envelope: ErrorEnvelope;

  constructor(status: number, envelope: ErrorEnvelope) {
    super(`${status}: ${envelope.message}`);
    this.status = status;
    this.envelope = envelope;
  }
}

export interface TokenResponse {
  token: string;
  expires_at: string;
}

export interface PrincipalInfo {
  id: string;
  name: string;
  role: string;
  kind: string;
}

export interface ValidateResponse {
  status: "Confirmed" | "Invalid";
  principal?: PrincipalInfo;
}

export interface ProductPayload {
  id: string;
  name: string;
  origin: string;
  description: string;
  monitoring?: { parameters: string[]; bounds: Record<string, { min: number | null; max: number | null }> };
  units?: UnitPayload[];
}

export interface UnitPayload {
  unit_id: string;
  level: string;
  lot_or_serial: string;
  quantity: number | null;
}

export interface SegmentStats {
  mean: string;
  min: string;
  max: string;
  sample_windows: number;
  windows: [string, number, number, number, number][];
}

export interface Violation {
  parameter: string;
  bound: "min" | "max";
  limit: string;
  observed: string;
}

export interface JourneySegment {
  location: string;
  location_type: "warehouse" | "vehicle";
  check_in: string;
  check_out: string | null;
  containment_chain: string[];
  device_count: number;
  stats: Record<string, SegmentStats>;
  violations: Violation[];
  track: [string, number, number][];
}

export interface Journey {
  unit_id: string;
  registered: boolean;
  product: { id: string; name: string; origin: string; description: string } | null;
  segments: JourneySegment[];
  provenance_event_ids: number[];
  warnings: string[];
}

export interface UiConfig {
  api_base: string;
  poll_interval_s: number;
}

export interface RecordedCall {
  method: string;
  template: string;
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private fetchImpl: FetchLike;
  private base: string;
  token: string | null = null;
  readonly recorded: RecordedCall[] = [];

  constructor(fetchImpl?: FetchLike, base = "") {
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
    this.base = base;
  }

  private async request<T>(
    method: string,
    template: string,
    params: Record<string, string> = {},
    options: { body?: unknown; query?: Record<string, string> } = {},
  ): Promise<T> {
    this.recorded.push({ method, template });
    let path = template;
    for (const [key, value] of Object.entries(params)) {
      path = path.replace(`{${key}}`, encodeURIComponent(value));
    }
    const query = options.query ? `?${new URLSearchParams(options.query)}` : "";
    const headers: Record<string, string> = {};
    if (this.token) headers["X-Auth-Token"] = this.token;
    let body: string | undefined;
    if (options.body !== undefined) {
      headers["Content-Type"] = "application/json";
      body = JSON.stringify(options.body);
    }
    const response = await this.fetchImpl(`${this.base}${path}${query}`, {
      method,
      headers,
      body,
    });
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, payload as ErrorEnvelope);
    }
    return payload as T;
  }

  async login(name: string, password: string): Promise<TokenResponse> {
    const response = await this.request<TokenResponse>("POST", "/v1/auth/tokens", {}, {
      body: { name, password },
    });
    this.token = response.token;
    return response;
  }

  validate(): Promise<ValidateResponse> {
    return this.request("GET", "/v1/auth/validate");
  }

  createProduct(fields: {
    name: string;
    gtin_base: { company_prefix: string; item_reference: string };
    description?: string;
    origin?: string;
    ingredients?: string;
    optimum_usage?: string;
  }): Promise<ProductPayload> {
    return this.request("POST", "/v1/products", {}, { body: fields });
  }

  listProducts(): Promise<{ products: ProductPayload[] }> {
    return this.request("GET", "/v1/products");
  }

  createUnits(
    productId: string,
    spec: { level: "instance"; serials: string[] } | { level: "batch"; lot: string; quantity: number },
  ): Promise<{ units: UnitPayload[] }> {
    return this.request("POST", "/v1/products/{product_id}/units", { product_id: productId }, { body: spec });
  }

  setMonitoring(
    productId: string,
    parameters: string[],
    bounds: Record<string, { min?: number; max?: number }> = {},
  ): Promise<ProductPayload> {
    return this.request("PUT", "/v1/products/{product_id}/monitoring", { product_id: productId }, {
      body: { parameters, bounds },
    });
  }

  trace(epc: string, granularity?: number): Promise<Journey> {
    const query = granularity !== undefined ? { granularity: String(granularity) } : undefined;
    return this.request("GET", "/v1/trace/{epc}", { epc }, { query });
  }

  uiConfig(): Promise<UiConfig> {
    return this.request("GET", "/ui/config.json");
  }
}

// Stale-response guard: concurrent requests are allowed, but only the most
// recently issued one may apply its result.
export class LatestOnly {
  private sequence = 0;

  issue(): number {
    return ++this.sequence;
  }

  isCurrent(ticket: number): boolean {
    return ticket === this.sequence;
  }
}
