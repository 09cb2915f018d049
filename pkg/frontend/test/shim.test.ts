import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import {
  RewardServiceError,
  healthCheck,
  scoreBatch,
  type TrajectoryDoc,
} from "../src/shim.js";

const FIXTURES = resolve(__dirname, "../../tests/fixtures");
const CATALOG = join(FIXTURES, "catalog.json");
const PERSONAS = join(FIXTURES, "personas.json");

let workDir: string;
let server: ChildProcess;
let serviceUrl: string;
let trajectories: TrajectoryDoc[];
let cliResults: Array<Record<string, any>>;

function readJsonl(path: string): Array<Record<string, any>> {
  return readFileSync(path, "utf-8")
    .split("\n")
    .filter((line) => line.trim())
    .map((line) => JSON.parse(line));
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "shim-"));
  const runDir = join(workDir, "run");
  execFileSync("shopsim", [
    "simulate", "--catalog", CATALOG, "--personas", PERSONAS,
    "--out", runDir, "--seed", "0",
  ]);
  const runsPath = join(runDir, "trajectories.jsonl");
  trajectories = readJsonl(runsPath);

  // Oracle: the CLI scorer over the same run.
  const rewardsPath = join(workDir, "rewards.jsonl");
  execFileSync("shopsim", [
    "reward-score", "--runs", runsPath, "--catalog", CATALOG,
    "--personas", PERSONAS, "--out", rewardsPath,
  ]);
  cliResults = readJsonl(rewardsPath);

  const port = 18400 + Math.floor(Math.random() * 1000);
  serviceUrl = `http://127.0.0.1:${port}`;
  server = spawn("shopsim", [
    "reward-serve", "--catalog", CATALOG, "--personas", PERSONAS,
    "--port", String(port),
  ], { stdio: "ignore" });
  for (let attempt = 0; attempt < 50; attempt += 1) {
    if (await healthCheck(serviceUrl)) return;
    await new Promise((tick) => setTimeout(tick, 100));
  }
  throw new Error("reward service did not come up");
}, 30_000);

afterAll(() => {
  server?.kill();
  rmSync(workDir, { recursive: true, force: true });
});

function maskFor(length: number): string[] {
  return Array.from({ length }, (_, i) => (i % 3 === 0 ? "other" : "shopper"));
}

describe("scoreBatch", () => {
  it("matches the CLI reward-score breakdowns to 1e-9", async () => {
    const masks = trajectories.map((_, i) => maskFor(5 + (i % 4)));
    const results = await scoreBatch(
      { trajectories, tokenRoleMasks: masks },
      serviceUrl,
    );
    expect(results).toHaveLength(cliResults.length);
    results.forEach((result, i) => {
      if (!result.ok) throw new Error(result.error);
      expect(Math.abs(result.aggregate - cliResults[i].aggregate))
        .toBeLessThan(1e-9);
      for (const [name, value] of Object.entries(cliResults[i].components)) {
        const shimValue = result.components[name];
        if (value === null) {
          expect(shimValue).toBeNull();
        } else {
          expect(Math.abs((shimValue as number) - (value as number)))
            .toBeLessThan(1e-9);
        }
      }
      expect(result.personaId).toBe(cliResults[i].persona_id);
    });
  });

  it("aligns per-token rewards with the supplied mask", async () => {
    const mask = ["shopper", "other", "shopper", "shopper", "other"];
    const [result] = await scoreBatch(
      { trajectories: [trajectories[0]], tokenRoleMasks: [mask] },
      serviceUrl,
    );
    if (!result.ok) throw new Error(result.error);
    expect(result.rewards).toHaveLength(mask.length);
    mask.forEach((role, i) => {
      if (role === "shopper") {
        expect(Math.abs(result.rewards[i] - result.aggregate))
          .toBeLessThan(1e-12);
      } else {
        expect(result.rewards[i]).toBe(0);
      }
    });
  });

  it("returns a zero array for an all-other mask", async () => {
    const mask = ["other", "other", "other"];
    const [result] = await scoreBatch(
      { trajectories: [trajectories[0]], tokenRoleMasks: [mask] },
      serviceUrl,
    );
    if (!result.ok) throw new Error(result.error);
    expect(result.rewards).toEqual([0, 0, 0]);
  });

  it("preserves input order", async () => {
    const picked = [trajectories[2], trajectories[0], trajectories[1]];
    const results = await scoreBatch(
      { trajectories: picked, tokenRoleMasks: picked.map(() => maskFor(4)) },
      serviceUrl,
    );
    const personaIds = results.map((r) => (r.ok ? r.personaId : "?"));
    expect(personaIds).toEqual(picked.map((t) => t.persona_id));
  });

  it("surfaces per-item errors without failing the batch", async () => {
    const results = await scoreBatch(
      {
        trajectories: [trajectories[0], { bogus: true }],
        tokenRoleMasks: [maskFor(4), maskFor(4)],
      },
      serviceUrl,
    );
    expect(results[0].ok).toBe(true);
    expect(results[1].ok).toBe(false);
  });

  it("rejects mismatched batch shapes client-side", async () => {
    await expect(
      scoreBatch(
        { trajectories: [trajectories[0]], tokenRoleMasks: [] },
        serviceUrl,
      ),
    ).rejects.toBeInstanceOf(RewardServiceError);
  });

  it("raises a transport error when the service is unreachable", async () => {
    await expect(
      scoreBatch(
        { trajectories: [trajectories[0]], tokenRoleMasks: [maskFor(3)] },
        "http://127.0.0.1:9",
      ),
    ).rejects.toBeInstanceOf(RewardServiceError);
  });

  it("returns an empty result for an empty batch without dialing", async () => {
    const results = await scoreBatch(
      { trajectories: [], tokenRoleMasks: [] },
      "http://127.0.0.1:9",
    );
    expect(results).toEqual([]);
  });
});
