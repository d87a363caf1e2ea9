/** Thin typed client for the dialog endpoints. */

import type { ApiErrorBody, Cell, SchemaChange, TableHeader, TablePayload } from "./types.js";

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly offset?: number;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.code = body.error;
    this.status = status;
    this.offset = body.offset;
  }
}

export interface ViewQuery {
  skip: number;
  take: number;
  order: string;
  filter: string;
}

async function unwrap<T>(resp: Response): Promise<T> {
  if (resp.ok) {
    return (await resp.json()) as T;
  }
  let body: ApiErrorBody;
  try {
    body = (await resp.json()) as ApiErrorBody;
  } catch {
    body = { error: "HttpError", message: `${resp.status} ${resp.statusText}` };
  }
  throw new ApiError(resp.status, body);
}

export class ApiClient {
  constructor(private readonly base: string = "") {}

  private url(path: string, query?: Record<string, string | number>): string {
    const params = new URLSearchParams();
    for (const [k, v] of Object.entries(query ?? {})) {
      params.set(k, String(v));
    }
    const qs = params.toString();
    return this.base + path + (qs ? `?${qs}` : "");
  }

  tables(): Promise<TableHeader[]> {
    return fetch(this.url("/api/tables")).then((r) => unwrap<TableHeader[]>(r));
  }

  /** The aggregate read: one request, one server snapshot. */
  table(name: string, q: ViewQuery): Promise<TablePayload> {
    return fetch(
      this.url(`/api/tables/${encodeURIComponent(name)}`, {
        skip: q.skip,
        take: q.take,
        order: q.order,
        filter: q.filter,
      }),
    ).then((r) => unwrap<TablePayload>(r));
  }

  createItem(table: string, cells: Cell[]): Promise<{ RowId: number; Epoch: number }> {
    return fetch(this.url(`/api/tables/${encodeURIComponent(table)}/items`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(cells),
    }).then((r) => unwrap(r));
  }

  updateItem(table: string, rowId: number, cells: Cell[]): Promise<{ Epoch: number }> {
    return fetch(this.url(`/api/tables/${encodeURIComponent(table)}/items/${rowId}`), {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(cells),
    }).then((r) => unwrap(r));
  }

  deleteItem(table: string, rowId: number): Promise<{ Epoch: number }> {
    return fetch(this.url(`/api/tables/${encodeURIComponent(table)}/items/${rowId}`), {
      method: "DELETE",
    }).then((r) => unwrap(r));
  }

  changeSchema(change: SchemaChange): Promise<{ Epoch: number }> {
    return fetch(this.url("/api/schema"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(change),
    }).then((r) => unwrap(r));
  }
}
