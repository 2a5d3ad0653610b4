// Thin typed client over the read-only package API.

import type { BillboardEntry, ExitEntry, Manifest } from "./types.js";

export type FetchLike = (url: string) => Promise<{
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}>;

export class ApiError extends Error {
  constructor(public url: string, public status: number) {
    super(`GET ${url} -> ${status}`);
  }
}

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchFn: FetchLike = (url) => fetch(url),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const url = this.base + path;
    const res = await this.fetchFn(url);
    if (!res.ok) throw new ApiError(url, res.status);
    return (await res.json()) as T;
  }

  manifest(): Promise<Manifest> {
    return this.getJson<Manifest>("/api/manifest");
  }

  exits(node: string, arriving?: string, includeUturn = false): Promise<ExitEntry[]> {
    const params = new URLSearchParams({ node });
    if (arriving !== undefined) params.set("arriving", arriving);
    if (includeUturn) params.set("include_uturn", "true");
    return this.getJson<ExitEntry[]>(`/api/exits?${params}`);
  }

  billboards(video: string, t: number): Promise<BillboardEntry[]> {
    const params = new URLSearchParams({ video, t: String(t) });
    return this.getJson<BillboardEntry[]>(`/api/billboards?${params}`);
  }

  sectionFrameUrl(sectionId: string, k: number): string {
    return `${this.base}/api/sections/${encodeURIComponent(sectionId)}/frames/${k}`;
  }

  turnFrameUrl(node: string, from: string, to: string, k: number): string {
    const enc = encodeURIComponent;
    return `${this.base}/api/turns/${enc(node)}/${enc(from)}/${enc(to)}/${k}`;
  }
}
