import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { beforeAll, describe, expect, it } from "vitest";

import { parseTranscript, ReplayStepper, TranscriptError } from "../src/replay.js";
import { runCli } from "./server.js";

let oracleTranscript: string;
let stallingTranscript: string;

beforeAll(async () => {
  const outDir = mkdtempSync(join(tmpdir(), "escaperoom-transcripts-"));
  const oracle = await runCli([
    "bench", "workshop", "--policy", "oracle", "--difficulty", "normal", "--out", outDir,
  ]);
  expect(oracle.code, oracle.stderr).toBe(0);
  oracleTranscript = readFileSync(join(outDir, "workshop_normal.jsonl"), "utf-8");

  const stallDir = mkdtempSync(join(tmpdir(), "escaperoom-transcripts-"));
  const stalling = await runCli([
    "bench", "workshop", "--policy", "obedient-noop",
    "--difficulty", "normal", "--hint-threshold", "50", "--out", stallDir,
  ]);
  expect(stalling.code, stalling.stderr).toBe(0);
  stallingTranscript = readFileSync(join(stallDir, "workshop_normal.jsonl"), "utf-8");
}, 120_000);

describe("parseTranscript", () => {
  it("loads an oracle run with zero hint markers", () => {
    const transcript = parseTranscript(oracleTranscript);
    expect(transcript.header.scenario).toBe("workshop");
    expect(transcript.header.completed).toBe(true);
    expect(transcript.steps.length).toBe(transcript.header.chain_length);
    expect(transcript.hints).toHaveLength(0);
    expect(transcript.metrics?.hints_used).toBe(0);
    expect(transcript.metrics?.early_exit_progress).toBe(100);
  });

  it("shows the stalling run's first hint marker at step 50", () => {
    const stepper = new ReplayStepper(parseTranscript(stallingTranscript));
    expect(stepper.hintMarkers()[0]).toBe(50);
    stepper.seek(49); // 0-based position of step index 50
    expect(stepper.current().hint_issued).toBe(true);
    expect(stepper.hintAfterCurrent()?.text).toContain("The next target location should be");
  });

  it("rejects truncated files", () => {
    const truncated = oracleTranscript.slice(0, Math.floor(oracleTranscript.length / 2));
    expect(() => parseTranscript(truncated)).toThrow(TranscriptError);
    expect(() => parseTranscript("")).toThrow(/no header/);
  });
});

describe("ReplayStepper", () => {
  it("clamps the cursor to the transcript", () => {
    const stepper = new ReplayStepper(parseTranscript(oracleTranscript));
    expect(stepper.current().index).toBe(1);
    stepper.prev();
    expect(stepper.current().index).toBe(1);
    for (let i = 0; i < 50; i += 1) {
      stepper.next();
    }
    expect(stepper.current().index).toBe(stepper.length);
  });

  it("walks the oracle run in order, all successes", () => {
    const stepper = new ReplayStepper(parseTranscript(oracleTranscript));
    const seen: number[] = [];
    for (let i = 0; i < stepper.length; i += 1) {
      seen.push(stepper.current().index);
      expect(stepper.current().success).toBe(true);
      stepper.next();
    }
    expect(seen).toEqual(Array.from({ length: stepper.length }, (_, i) => i + 1));
  });
});
