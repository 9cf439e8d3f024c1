import { existsSync, mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";
import { EXIT_OK, EXIT_USAGE, main } from "../src/cli.js";

const fixture = (name: string) =>
  fileURLToPath(new URL(`./fixtures/${name}`, import.meta.url));

const scratch = () => mkdtempSync(join(tmpdir(), "figcli-"));

function writeSpec(dir: string, body: object): string {
  const path = join(dir, "spec.json");
  writeFileSync(path, JSON.stringify(body));
  return path;
}

describe("cli main", () => {
  it("renders a figure from a spec file", () => {
    const dir = scratch();
    const output = join(dir, "delay.svg");
    const specPath = writeSpec(dir, {
      input: fixture("aggregate.csv"),
      kind: "delay_vs_r",
      output,
    });
    expect(main(["render", "--spec", specPath])).toBe(EXIT_OK);
    expect(existsSync(output)).toBe(true);
  });

  it("rejects unknown commands and missing arguments", () => {
    expect(main([])).toBe(EXIT_USAGE);
    expect(main(["plot"])).toBe(EXIT_USAGE);
    expect(main(["render"])).toBe(EXIT_USAGE);
    expect(main(["render", "--spec"])).toBe(EXIT_USAGE);
    expect(main(["render", "--bogus", "x"])).toBe(EXIT_USAGE);
  });

  it("reports unreadable or invalid specs without throwing", () => {
    expect(main(["render", "--spec", "/nonexistent/spec.json"])).toBe(EXIT_USAGE);
    const dir = scratch();
    const bad = writeSpec(dir, { input: "x.csv", kind: "pie", output: "o.svg" });
    expect(main(["render", "--spec", bad])).toBe(EXIT_USAGE);
  });

  it("reports schema failures from the table layer", () => {
    const dir = scratch();
    const specPath = writeSpec(dir, {
      input: fixture("improvement.csv"),
      kind: "delay_vs_r",
      output: join(dir, "o.svg"),
    });
    expect(main(["render", "--spec", specPath])).toBe(EXIT_USAGE);
  });
});
