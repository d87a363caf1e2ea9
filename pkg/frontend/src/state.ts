/** Pure view-state helpers: paging math, order cycling, relation filters. */

import type { DataTypeName, Relation, TablePayload } from "./types.js";

export interface ViewState {
  table: string;
  skip: number;
  take: number;
  order: string;
  filter: string;
}

export const DEFAULT_TAKE = 25;

export function initialView(table: string): ViewState {
  return { table, skip: 0, take: DEFAULT_TAKE, order: "", filter: "" };
}

export function pageCount(total: number, take: number): number {
  if (take <= 0) return 1;
  return Math.max(1, Math.ceil(total / take));
}

export function currentPage(skip: number, take: number): number {
  return take <= 0 ? 1 : Math.floor(skip / take) + 1;
}

/** Column-header click: asc on first click, then toggle asc/desc. */
export function toggleOrder(order: string, field: string): string {
  if (order === `${field} asc`) return `${field} desc`;
  return `${field} asc`;
}

export function orderedField(order: string): { field: string; ascending: boolean } | null {
  const m = /^(\w+) (asc|desc)$/.exec(order);
  return m ? { field: m[1], ascending: m[2] === "asc" } : null;
}

/** Render one cell value as a filter literal of the given type. */
export function filterLiteral(type: DataTypeName, cell: string): string {
  switch (type) {
    case "varchar":
      return `'${cell.replace(/'/g, "''")}'`;
    case "bit":
      return cell === "1" ? "true" : "false";
    case "datetime":
      return `datetime'${cell}'`;
    default:
      return cell;
  }
}

/**
 * Filter preset for navigating a relation from an open item: matches rows of
 * the referencing table whose FK field equals the open item's key value.
 * Null key values cannot be referenced, so navigation yields null.
 */
export function relationFilter(
  rel: Relation,
  payload: TablePayload,
  rowIndex: number,
): string | null {
  const keyIdx = payload.Fields.findIndex((f) => f.Name === rel.PK_FieldName);
  if (keyIdx < 0) return null;
  const cell = payload.Items[rowIndex]?.[keyIdx];
  if (cell === null || cell === undefined) return null;
  return `${rel.FK_FieldName} = ${filterLiteral(payload.Fields[keyIdx].DataType, cell)}`;
}
