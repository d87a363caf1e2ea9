/** The application controller: wires the dialog client to generated DOM.
 *
 * Everything on screen derives from server metadata — there is not a single
 * table or field name in this bundle. Each view renders from exactly one
 * aggregate payload, so columns, rows, relations and the total can never be
 * from different schema epochs.
 */

import { ApiClient, ApiError } from "./api.js";
import { buildFieldEditor, validateRow } from "./form.js";
import {
  ViewState,
  currentPage,
  initialView,
  orderedField,
  pageCount,
  relationFilter,
  toggleOrder,
} from "./state.js";
import type { Cell, ColumnSpec, DataTypeName, SchemaChange, TableHeader, TablePayload } from "./types.js";

type Mode = { kind: "browse" } | { kind: "open"; rowIndex: number } | { kind: "create" };

export class App {
  tables: TableHeader[] = [];
  view: ViewState | null = null;
  payload: TablePayload | null = null;
  private mode: Mode = { kind: "browse" };
  private requestSeq = 0;
  private schemaStatus: string | null = null;
  private schemaEditorOpen = false;
  private readonly doc: Document;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {
    this.doc = root.ownerDocument;
  }

  async start(): Promise<void> {
    await this.refreshTables();
    this.render();
  }

  /** The table list is cheap and almost invariable: fetched at start and
   * refreshed after any schema change. */
  async refreshTables(): Promise<void> {
    this.tables = await this.api.tables();
  }

  async openTable(name: string, filter = ""): Promise<void> {
    this.view = { ...initialView(name), filter };
    this.mode = { kind: "browse" };
    await this.fetchView();
  }

  /** One aggregate request per view; stale responses are dropped. */
  async fetchView(): Promise<void> {
    if (!this.view) return;
    const seq = ++this.requestSeq;
    try {
      const payload = await this.api.table(this.view.table, this.view);
      if (seq !== this.requestSeq) return; // superseded
      this.payload = payload;
      if (this.mode.kind === "open" && this.mode.rowIndex >= payload.Items.length) {
        this.mode = { kind: "browse" };
      }
      this.clearError();
    } catch (e) {
      if (seq !== this.requestSeq) return;
      this.showError(e);
      if (e instanceof ApiError && e.code === "UnknownTable") {
        this.view = null;
        this.payload = null;
        await this.refreshTables();
      }
    }
    this.render();
  }

  // -- rendering -------------------------------------------------------------

  render(): void {
    this.root.textContent = "";
    const layout = this.el("div", "layout");
    layout.appendChild(this.renderNavigation());
    const main = this.el("main", "content");
    if (this.view && this.payload) {
      main.appendChild(this.renderToolbar());
      main.appendChild(this.renderGrid());
      if (this.mode.kind === "open") {
        main.appendChild(this.renderDetails(this.mode.rowIndex));
      } else if (this.mode.kind === "create") {
        main.appendChild(this.renderDetails(null));
      }
    } else {
      const empty = this.el("p", "empty-state");
      empty.textContent = this.tables.length
        ? "Pick a table from the menu."
        : "No tables yet — create one in the schema editor.";
      main.appendChild(empty);
    }
    layout.appendChild(main);
    this.root.appendChild(this.errorBanner());
    this.root.appendChild(layout);
    const editor = renderSchemaEditor(this.doc, this.tables, this.schemaStatus, (change) =>
      this.applySchema(change),
    );
    editor.open = this.schemaEditorOpen;
    editor.addEventListener("toggle", () => {
      this.schemaEditorOpen = editor.open;
    });
    this.root.appendChild(editor);
  }

  private renderNavigation(): HTMLElement {
    const nav = this.el("nav", "table-menu");
    const list = this.el("ul");
    for (const header of this.tables) {
      const item = this.el("li");
      const link = this.el("button", "table-link") as HTMLButtonElement;
      link.textContent = header.TableName;
      link.dataset.table = header.TableName;
      if (this.view?.table === header.TableName) link.classList.add("active");
      link.addEventListener("click", () => void this.openTable(header.TableName));
      item.appendChild(link);
      list.appendChild(item);
    }
    nav.appendChild(list);
    return nav;
  }

  private renderToolbar(): HTMLElement {
    const view = this.view!;
    const payload = this.payload!;
    const bar = this.el("div", "toolbar");

    const filterForm = this.el("form", "filter-form") as HTMLFormElement;
    const filterBox = this.el("input", "filter-box") as HTMLInputElement;
    filterBox.type = "text";
    filterBox.placeholder = "filter, e.g. amount > 100 and note is null";
    filterBox.value = view.filter;
    const go = this.el("button") as HTMLButtonElement;
    go.type = "submit";
    go.textContent = "apply";
    filterForm.appendChild(filterBox);
    filterForm.appendChild(go);
    filterForm.addEventListener("submit", (ev) => {
      ev.preventDefault();
      view.filter = filterBox.value;
      view.skip = 0;
      void this.fetchView();
    });
    bar.appendChild(filterForm);

    const total = this.el("span", "total-label");
    total.textContent = `Total: ${payload.Total}`;
    bar.appendChild(total);

    bar.appendChild(this.renderPager());

    const add = this.el("button", "new-item") as HTMLButtonElement;
    add.textContent = "new item";
    add.addEventListener("click", () => {
      this.mode = { kind: "create" };
      this.render();
    });
    bar.appendChild(add);
    return bar;
  }

  private renderPager(): HTMLElement {
    const view = this.view!;
    const pages = pageCount(this.payload!.Total, view.take);
    const page = currentPage(view.skip, view.take);
    const pager = this.el("span", "pager");
    const prev = this.el("button") as HTMLButtonElement;
    prev.textContent = "<";
    prev.disabled = page <= 1;
    prev.addEventListener("click", () => {
      view.skip = Math.max(0, view.skip - view.take);
      void this.fetchView();
    });
    const label = this.el("span", "page-label");
    label.textContent = `page ${page} / ${pages}`;
    const next = this.el("button") as HTMLButtonElement;
    next.textContent = ">";
    next.disabled = page >= pages;
    next.addEventListener("click", () => {
      view.skip = view.skip + view.take;
      void this.fetchView();
    });
    pager.appendChild(prev);
    pager.appendChild(label);
    pager.appendChild(next);
    return pager;
  }

  private renderGrid(): HTMLElement {
    const payload = this.payload!;
    const view = this.view!;
    const table = this.el("table", "grid") as HTMLTableElement;
    const head = this.el("thead");
    const headRow = this.el("tr");
    const ordered = orderedField(view.order);
    for (const field of payload.Fields) {
      const th = this.el("th") as HTMLTableCellElement;
      th.textContent = field.Name;
      th.dataset.field = field.Name;
      if (ordered?.field === field.Name) {
        th.textContent += ordered.ascending ? " ↑" : " ↓";
      }
      th.addEventListener("click", () => {
        view.order = toggleOrder(view.order, field.Name);
        void this.fetchView();
      });
      headRow.appendChild(th);
    }
    head.appendChild(headRow);
    table.appendChild(head);

    const body = this.el("tbody");
    payload.Items.forEach((item, rowIndex) => {
      const tr = this.el("tr") as HTMLTableRowElement;
      tr.dataset.rowId = String(payload.RowIds[rowIndex]);
      item.forEach((cell) => {
        const td = this.el("td") as HTMLTableCellElement;
        td.textContent = cell === null ? "∅" : cell;
        if (cell === null) td.classList.add("null-cell");
        tr.appendChild(td);
      });
      tr.addEventListener("click", () => {
        this.mode = { kind: "open", rowIndex };
        this.render();
      });
      body.appendChild(tr);
    });
    table.appendChild(body);
    return table;
  }

  /** Details form: one editor per field; rowIndex null means "new item". */
  private renderDetails(rowIndex: number | null): HTMLElement {
    const payload = this.payload!;
    const panel = this.el("section", "details");
    const heading = this.el("h2");
    heading.textContent = rowIndex === null ? "new item" : `item ${payload.RowIds[rowIndex]}`;
    panel.appendChild(heading);

    const form = this.el("form", "details-form") as HTMLFormElement;
    form.noValidate = true;
    const editors = payload.Fields.map((field, i) =>
      buildFieldEditor(this.doc, field, rowIndex === null ? null : payload.Items[rowIndex][i]),
    );
    editors.forEach((ed) => form.appendChild(ed.wrapper));

    const formError = this.el("p", "form-error");

    const actions = this.el("div", "actions");
    const save = this.el("button", "save") as HTMLButtonElement;
    save.type = "submit";
    save.textContent = "save";
    actions.appendChild(save);

    if (rowIndex !== null) {
      const del = this.el("button", "delete") as HTMLButtonElement;
      del.type = "button";
      del.textContent = "delete";
      del.addEventListener("click", () => void this.deleteRow(payload.RowIds[rowIndex]));
      actions.appendChild(del);
    }
    const close = this.el("button", "close") as HTMLButtonElement;
    close.type = "button";
    close.textContent = "close";
    close.addEventListener("click", () => {
      this.mode = { kind: "browse" };
      this.render();
    });
    actions.appendChild(close);
    form.appendChild(actions);
    form.appendChild(formError);

    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      const cells = editors.map((ed) => ed.read());
      // client-side validation from metadata; nothing leaves the page on error
      const errors = validateRow(payload.Fields, cells);
      editors.forEach((ed, i) => {
        const fieldErr = errors.find((m) => m.startsWith(payload.Fields[i].Name + " "));
        ed.setError(fieldErr ?? null);
      });
      if (errors.length > 0) {
        formError.textContent = "fix the marked fields";
        return;
      }
      formError.textContent = "";
      void this.submitRow(rowIndex === null ? null : payload.RowIds[rowIndex], cells, formError);
    });
    panel.appendChild(form);

    if (rowIndex !== null) {
      panel.appendChild(this.renderRelationsSubmenu(rowIndex));
    }
    return panel;
  }

  /** The auto-generated submenu of the open item: one entry per referencing
   * field, navigating to the referencing table with the filter preset. */
  private renderRelationsSubmenu(rowIndex: number): HTMLElement {
    const payload = this.payload!;
    const wrap = this.el("div", "relations");
    if (payload.Relations.length === 0) return wrap;
    const heading = this.el("h3");
    heading.textContent = "referenced by";
    wrap.appendChild(heading);
    const list = this.el("ul", "relations-menu");
    for (const rel of payload.Relations) {
      const filter = relationFilter(rel, payload, rowIndex);
      if (filter === null) continue;
      const li = this.el("li");
      const link = this.el("button", "relation-link") as HTMLButtonElement;
      link.textContent = `${rel.FK_TableName} (${rel.FK_FieldName})`;
      link.dataset.filter = filter;
      link.addEventListener("click", () => void this.openTable(rel.FK_TableName, filter));
      li.appendChild(link);
      list.appendChild(li);
    }
    wrap.appendChild(list);
    return wrap;
  }

  // -- mutations ----------------------------------------------------------------

  private async submitRow(rowId: number | null, cells: Cell[], errorLine: HTMLElement): Promise<void> {
    const view = this.view!;
    try {
      if (rowId === null) {
        await this.api.createItem(view.table, cells);
      } else {
        await this.api.updateItem(view.table, rowId, cells);
      }
      this.mode = { kind: "browse" };
      await this.fetchView();
    } catch (e) {
      errorLine.textContent = e instanceof ApiError ? `${e.code}: ${e.message}` : String(e);
    }
  }

  private async deleteRow(rowId: number): Promise<void> {
    try {
      await this.api.deleteItem(this.view!.table, rowId);
      this.mode = { kind: "browse" };
      await this.fetchView();
    } catch (e) {
      this.showError(e);
      this.render();
    }
  }

  async applySchema(change: SchemaChange): Promise<string | null> {
    try {
      await this.api.changeSchema(change);
    } catch (e) {
      const message = e instanceof ApiError ? `${e.code}: ${e.message}` : String(e);
      this.schemaStatus = message;
      this.render();
      return message;
    }
    this.schemaStatus = "applied";
    // refresh navigation and, if still present, the open grid — in place
    await this.refreshTables();
    if (this.view && this.tables.some((t) => t.TableName === this.view!.table)) {
      await this.fetchView();
    } else {
      this.view = null;
      this.payload = null;
      this.render();
    }
    return null;
  }

  // -- errors ---------------------------------------------------------------------

  private lastError: string | null = null;

  private showError(e: unknown): void {
    if (e instanceof ApiError) {
      this.lastError =
        e.offset !== undefined ? `${e.code} at offset ${e.offset}: ${e.message}` : `${e.code}: ${e.message}`;
    } else {
      this.lastError = String(e);
    }
  }

  private clearError(): void {
    this.lastError = null;
  }

  private errorBanner(): HTMLElement {
    const banner = this.el("div", "error-banner");
    if (this.lastError) {
      banner.textContent = this.lastError;
      const retry = this.el("button") as HTMLButtonElement;
      retry.textContent = "retry";
      retry.addEventListener("click", () => void this.fetchView());
      banner.appendChild(retry);
      banner.classList.add("visible");
    }
    return banner;
  }

  private el(tag: string, className?: string): HTMLElement {
    const node = this.doc.createElement(tag);
    if (className) node.className = className;
    return node;
  }
}

// -- schema editor -------------------------------------------------------------------

const DATA_TYPES: DataTypeName[] = ["int", "varchar", "bit", "real", "datetime"];

function renderSchemaEditor(
  doc: Document,
  tables: { TableName: string }[],
  statusText: string | null,
  apply: (change: SchemaChange) => Promise<string | null>,
): HTMLDetailsElement {
  const el = (tag: string, cls?: string) => {
    const n = doc.createElement(tag);
    if (cls) n.className = cls;
    return n;
  };
  const panel = el("details", "schema-editor") as HTMLDetailsElement;
  const summary = el("summary");
  summary.textContent = "schema editor";
  panel.appendChild(summary);

  // the app re-renders after every change; the outcome line rides app state
  const status = el("p", "schema-status");
  status.textContent = statusText ?? "";
  status.classList.toggle("schema-error", statusText !== null && statusText !== "applied");

  const run = async (change: SchemaChange) => {
    await apply(change);
  };

  const tableSelect = (cls: string): HTMLSelectElement => {
    const sel = el("select", cls) as HTMLSelectElement;
    for (const t of tables) {
      const opt = doc.createElement("option") as HTMLOptionElement;
      opt.value = t.TableName;
      opt.textContent = t.TableName;
      sel.appendChild(opt);
    }
    return sel;
  };
  const textInput = (cls: string, placeholder: string): HTMLInputElement => {
    const input = el("input", cls) as HTMLInputElement;
    input.type = "text";
    input.placeholder = placeholder;
    return input;
  };
  const typeSelect = (cls: string): HTMLSelectElement => {
    const sel = el("select", cls) as HTMLSelectElement;
    for (const t of DATA_TYPES) {
      const opt = doc.createElement("option") as HTMLOptionElement;
      opt.value = t;
      opt.textContent = t;
      sel.appendChild(opt);
    }
    return sel;
  };

  const columnSpecFrom = (
    name: HTMLInputElement,
    type: HTMLSelectElement,
    maxLen: HTMLInputElement,
    nullable: HTMLInputElement,
    constraint?: HTMLSelectElement,
  ): ColumnSpec => {
    const spec: ColumnSpec = {
      name: name.value.trim(),
      data_type: type.value as DataTypeName,
      is_nullable: nullable.checked,
    };
    if (spec.data_type === "varchar") {
      spec.max_length = maxLen.value === "" ? -1 : Number(maxLen.value);
    }
    if (constraint && constraint.value !== "") {
      spec.constraint = constraint.value as ColumnSpec["constraint"];
    }
    return spec;
  };

  // create table: name plus a growable list of column rows
  {
    const form = el("form", "schema-create-table") as HTMLFormElement;
    const tableName = textInput("new-table-name", "table name");
    form.appendChild(tableName);
    const columnRows = el("div", "column-rows");

    const addColumnRow = () => {
      const row = el("div", "column-row");
      row.appendChild(textInput("col-name", "column name"));
      row.appendChild(typeSelect("col-type"));
      row.appendChild(textInput("col-maxlen", "max length (varchar, empty = unlimited)"));
      const nullable = el("input", "col-nullable") as HTMLInputElement;
      nullable.type = "checkbox";
      nullable.checked = true;
      const nlabel = el("label");
      nlabel.appendChild(nullable);
      nlabel.appendChild(doc.createTextNode("nullable"));
      row.appendChild(nlabel);
      const constraint = el("select", "col-constraint") as HTMLSelectElement;
      for (const c of ["", "PRIMARY KEY", "UNIQUE", "CHECK"]) {
        const opt = doc.createElement("option") as HTMLOptionElement;
        opt.value = c;
        opt.textContent = c === "" ? "no constraint" : c;
        constraint.appendChild(opt);
      }
      row.appendChild(constraint);
      columnRows.appendChild(row);
    };
    addColumnRow();
    form.appendChild(columnRows);

    const more = el("button", "add-column-row") as HTMLButtonElement;
    more.type = "button";
    more.textContent = "+ column";
    more.addEventListener("click", addColumnRow);
    form.appendChild(more);

    const submit = el("button", "create-table-go") as HTMLButtonElement;
    submit.type = "submit";
    submit.textContent = "create table";
    form.appendChild(submit);
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      const columns = Array.from(columnRows.querySelectorAll<HTMLElement>(".column-row"))
        .map((row) =>
          columnSpecFrom(
            row.querySelector<HTMLInputElement>(".col-name")!,
            row.querySelector<HTMLSelectElement>(".col-type")!,
            row.querySelector<HTMLInputElement>(".col-maxlen")!,
            row.querySelector<HTMLInputElement>(".col-nullable")!,
            row.querySelector<HTMLSelectElement>(".col-constraint")!,
          ),
        )
        .filter((c) => c.name !== "");
      void run({ kind: "create-table", table: tableName.value.trim(), columns });
    });
    panel.appendChild(form);
  }

  if (tables.length > 0) {
    // drop table
    {
      const form = el("form", "schema-drop-table") as HTMLFormElement;
      const sel = tableSelect("drop-table-name");
      const go = el("button") as HTMLButtonElement;
      go.type = "submit";
      go.textContent = "drop table";
      form.appendChild(sel);
      form.appendChild(go);
      form.addEventListener("submit", (ev) => {
        ev.preventDefault();
        void run({ kind: "drop-table", table: sel.value });
      });
      panel.appendChild(form);
    }
    // add / drop column
    {
      const form = el("form", "schema-add-column") as HTMLFormElement;
      const sel = tableSelect("add-col-table");
      const name = textInput("add-col-name", "column name");
      const type = typeSelect("add-col-type");
      const maxLen = textInput("add-col-maxlen", "max length");
      const nullable = el("input") as HTMLInputElement;
      nullable.type = "checkbox";
      nullable.checked = true;
      const go = el("button") as HTMLButtonElement;
      go.type = "submit";
      go.textContent = "add column";
      for (const node of [sel, name, type, maxLen, nullable, go]) form.appendChild(node);
      form.addEventListener("submit", (ev) => {
        ev.preventDefault();
        void run({
          kind: "add-column",
          table: sel.value,
          column: columnSpecFrom(name, type, maxLen, nullable),
        });
      });
      panel.appendChild(form);

      const dropForm = el("form", "schema-drop-column") as HTMLFormElement;
      const dropSel = tableSelect("drop-col-table");
      const dropName = textInput("drop-col-name", "column name");
      const dropGo = el("button") as HTMLButtonElement;
      dropGo.type = "submit";
      dropGo.textContent = "drop column";
      for (const node of [dropSel, dropName, dropGo]) dropForm.appendChild(node);
      dropForm.addEventListener("submit", (ev) => {
        ev.preventDefault();
        void run({ kind: "drop-column", table: dropSel.value, column: dropName.value.trim() });
      });
      panel.appendChild(dropForm);
    }
    // add foreign key / drop constraint
    {
      const form = el("form", "schema-add-fk") as HTMLFormElement;
      const sel = tableSelect("fk-table");
      const col = textInput("fk-column", "referencing column");
      const pkSel = tableSelect("fk-pk-table");
      const pkCol = textInput("fk-pk-column", "referenced column");
      const go = el("button") as HTMLButtonElement;
      go.type = "submit";
      go.textContent = "add foreign key";
      for (const node of [sel, col, pkSel, pkCol, go]) form.appendChild(node);
      form.addEventListener("submit", (ev) => {
        ev.preventDefault();
        void run({
          kind: "add-foreign-key",
          table: sel.value,
          column: col.value.trim(),
          pk_table: pkSel.value,
          pk_column: pkCol.value.trim(),
        });
      });
      panel.appendChild(form);

      const dropForm = el("form", "schema-drop-constraint") as HTMLFormElement;
      const name = textInput("drop-constraint-name", "constraint name, e.g. fk_a_b");
      const dropGo = el("button") as HTMLButtonElement;
      dropGo.type = "submit";
      dropGo.textContent = "drop constraint";
      dropForm.appendChild(name);
      dropForm.appendChild(dropGo);
      dropForm.addEventListener("submit", (ev) => {
        ev.preventDefault();
        void run({ kind: "drop-constraint", constraint: name.value.trim() });
      });
      panel.appendChild(dropForm);
    }
  }

  panel.appendChild(status);
  return panel;
}
