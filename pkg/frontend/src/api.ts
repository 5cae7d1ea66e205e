/**
 * Typed client for the availability gateway's JSON representations.
 * Field names mirror the wire documents exactly; Price and DistanceKm
 * stay strings end to end so "5.0000" is never reformatted.
 */

export interface DrugHit {
  name: string;
  Price: string;
  Description: string;
  VendorName: string;
  ServiceId: string;
  DistanceKm?: string;
}

export interface Failure {
  Vendor: string;
  Kind: string;
}

export interface SearchResults {
  Query: string;
  Drug: DrugHit[];
  Diagnostics: {
    ProvidersQueried: number;
    Failures: Failure[];
    NotFoundCount: number;
  };
}

export interface DrugDetail {
  name: string;
  Quantity: number;
  VendorAddress: string;
  Substitutes: string[];
}

export type Fetcher = (url: string, init?: RequestInit) => Promise<Response>;

/** A 4xx/5xx answer, carrying the gateway's machine-readable code. */
export class ApiError extends Error {
  constructor(readonly code: string, message: string) {
    super(message);
    this.name = 'ApiError';
  }
}

export class AvailabilityClient {
  constructor(
    private readonly fetcher: Fetcher = (url, init) => fetch(url, init),
  ) {}

  async search(
    drug: string,
    location: { lat: string; lon: string } | null,
    signal?: AbortSignal,
  ): Promise<SearchResults> {
    const params = new URLSearchParams({ drug });
    if (location) {
      params.set('lat', location.lat);
      params.set('lon', location.lon);
    }
    return this.call(`/api/search?${params}`, signal);
  }

  async detail(
    serviceId: string,
    drug: string,
    signal?: AbortSignal,
  ): Promise<DrugDetail> {
    const params = new URLSearchParams({ service_id: serviceId, drug });
    return this.call(`/api/detail?${params}`, signal);
  }

  private async call(url: string, signal?: AbortSignal) {
    const response = await this.fetcher(url, {
      headers: { Accept: 'application/json' },
      signal,
    });
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      if (body && typeof body.Code === 'string') {
        throw new ApiError(body.Code, String(body.Message ?? ''));
      }
      throw new ApiError(`HTTP${response.status}`, 'unexpected response');
    }
    return body;
  }
}
