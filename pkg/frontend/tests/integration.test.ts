// @vitest-environment jsdom
/**
 * End-to-end against a real server process: the UI renders purely from
 * metadata, validates from metadata, navigates relations with the preset
 * filter, and picks up schema edits without any reload.
 */
import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { App } from "../src/app.js";

const SEED = [
  {
    kind: "create-table",
    table: "author",
    columns: [
      { name: "id", data_type: "int", is_nullable: false, constraint: "PRIMARY KEY" },
      { name: "pen_name", data_type: "varchar", max_length: 40, is_nullable: false },
    ],
  },
  {
    kind: "create-table",
    table: "book",
    columns: [
      { name: "id", data_type: "int", is_nullable: false, constraint: "PRIMARY KEY" },
      { name: "author_id", data_type: "int", is_nullable: false },
      { name: "title", data_type: "varchar", max_length: -1, is_nullable: true },
    ],
  },
  { kind: "add-foreign-key", table: "book", column: "author_id", pk_table: "author", pk_column: "id" },
];

let server: ChildProcess;
let base: string;
let api: ApiClient;

function freePort(): Promise<number> {
  return new Promise((done, fail) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const port = (srv.address() as { port: number }).port;
      srv.close(() => done(port));
    });
    srv.on("error", fail);
  });
}

async function waitForServer(url: string): Promise<void> {
  for (let i = 0; i < 150; i++) {
    try {
      const r = await fetch(url + "/api/tables");
      if (r.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 100));
  }
  throw new Error("server did not come up");
}

async function settle(): Promise<void> {
  // let queued fetch-then-render chains drain
  for (let i = 0; i < 20; i++) await new Promise((r) => setTimeout(r, 5));
}

beforeAll(async () => {
  const port = await freePort();
  const dir = mkdtempSync(join(tmpdir(), "dialogd-ui-test-"));
  const seedPath = join(dir, "seed.json");
  writeFileSync(seedPath, JSON.stringify(SEED));
  server = spawn(
    "python3",
    ["-m", "dialogd.cli", "--port", String(port), "--data-dir", join(dir, "data"), "--seed", seedPath],
    { cwd: resolve(__dirname, "../.."), stdio: "ignore" },
  );
  base = `http://127.0.0.1:${port}`;
  api = new ApiClient(base);
  await waitForServer(base);
  await api.createItem("author", ["1", "Iris Hale"]);
  await api.createItem("author", ["2", "Mo Park"]);
  await api.createItem("book", ["1", "1", "First Light"]);
  await api.createItem("book", ["2", "1", null]);
  await api.createItem("book", ["3", "2", "Monsoon"]);
}, 30_000);

afterAll(() => {
  server?.kill("SIGKILL");
});

async function mountedApp(): Promise<App> {
  const root = document.createElement("div");
  document.body.textContent = "";
  document.body.appendChild(root);
  const app = new App(root, api);
  await app.start();
  return app;
}

describe("against a live server", () => {
  it("renders grid columns exactly in the server's field order", async () => {
    const app = await mountedApp();
    await app.openTable("book");
    const fieldsResp = await fetch(`${base}/api/tables/book/fields`);
    const fieldNames = ((await fieldsResp.json()) as { Name: string }[]).map((f) => f.Name);
    const headers = Array.from(document.querySelectorAll(".grid th")).map((n) =>
      (n.textContent ?? "").replace(/ [↑↓]$/, ""),
    );
    expect(headers).toEqual(fieldNames);
    expect(headers).toEqual(["id", "author_id", "title"]);
    expect(document.querySelectorAll(".grid tbody tr")).toHaveLength(3);
  });

  it("enforces IsNullable and MaxLength client-side in the details form", async () => {
    const app = await mountedApp();
    await app.openTable("author");
    (document.querySelectorAll(".grid tbody tr")[0] as HTMLElement).click();

    const input = document.querySelector(
      '.field-editor[data-field="pen_name"] .field-input',
    ) as HTMLInputElement;
    expect(input.maxLength).toBe(40); // MaxLength drives the input cap
    expect(input.required).toBe(true); // IsNullable drives the marker

    input.value = "";
    (document.querySelector(".details-form") as HTMLFormElement).dispatchEvent(
      new Event("submit", { cancelable: true }),
    );
    await settle();
    expect(
      document.querySelector('.field-editor[data-field="pen_name"] .field-error')?.textContent,
    ).toMatch(/required/);
    // nothing was written: the row is unchanged server-side
    const rows = (await (await fetch(`${base}/api/tables/author/items?filter=id%20%3D%201`)).json()) as string[][];
    expect(rows[0][1]).toBe("Iris Hale");
  });

  it("navigates a relation with the auto-preset filter", async () => {
    const app = await mountedApp();
    await app.openTable("author");
    (document.querySelectorAll(".grid tbody tr")[0] as HTMLElement).click();

    const link = document.querySelector(".relation-link") as HTMLButtonElement;
    expect(link.textContent).toBe("book (author_id)");
    expect(link.dataset.filter).toBe("author_id = 1");
    link.click();
    await settle();

    expect(app.view?.table).toBe("book");
    expect(app.view?.filter).toBe("author_id = 1");
    const keyCells = Array.from(document.querySelectorAll(".grid tbody tr")).map(
      (tr) => (tr.children[1] as HTMLElement).textContent,
    );
    expect(keyCells).toEqual(["1", "1"]); // only the open author's books
  });

  it("a table created in the schema editor appears in navigation without reload", async () => {
    const app = await mountedApp();
    const before = Array.from(document.querySelectorAll(".table-link")).map((n) => n.textContent);
    expect(before).not.toContain("press");

    (document.querySelector(".new-table-name") as HTMLInputElement).value = "press";
    const row = document.querySelector(".column-row") as HTMLElement;
    (row.querySelector(".col-name") as HTMLInputElement).value = "id";
    (row.querySelector(".col-type") as HTMLSelectElement).value = "int";
    (row.querySelector(".col-constraint") as HTMLSelectElement).value = "PRIMARY KEY";
    (document.querySelector(".schema-create-table") as HTMLFormElement).dispatchEvent(
      new Event("submit", { cancelable: true }),
    );
    await settle();

    const after = Array.from(document.querySelectorAll(".table-link")).map((n) => n.textContent);
    expect(after).toContain("press"); // same App instance, no reload anywhere
    expect(document.querySelector(".schema-status")?.textContent).toBe("applied");
  });

  it("surfaces structured schema errors verbatim", async () => {
    const app = await mountedApp();
    await app.openTable("author");
    const err = await app.applySchema({ kind: "drop-table", table: "author" });
    expect(err).toMatch(/^TableReferenced: /);
  });
});
