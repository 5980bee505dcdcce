import { describe, expect, it } from "vitest";

import {
  applyStream,
  buildSteer,
  initialState,
  steerAccepted,
  steerRejected,
  steerStarted,
  withDrill,
  withForm,
  withSqlNode,
} from "../src/state.js";
import type { StreamEvent } from "../src/types.js";
import { countSnapshot, miSnapshot } from "./fixtures.js";

function snapEvent(seq: number, snap = countSnapshot(seq)): StreamEvent {
  return { type: "snapshot", seq, payload: { ...snap, seq } };
}

describe("applyStream", () => {
  it("stores the first snapshot and seeds the form from its steering", () => {
    const s = applyStream(initialState(), snapEvent(1, miSnapshot(1)));
    expect(s.snapshot?.seq).toBe(1);
    expect(s.form.label).toBe("A");
    expect(s.form.threshold).toBe("0.05");
    expect(s.form.lambda).toBe("0.1");
    expect(s.form.allFeatures).toBe(true);
  });

  it("ignores a snapshot whose seq is not newer", () => {
    const s1 = applyStream(initialState(), snapEvent(5));
    const s2 = applyStream(s1, snapEvent(5));
    const s3 = applyStream(s1, snapEvent(4));
    expect(s2).toBe(s1);
    expect(s3).toBe(s1);
  });

  it("keeps user form edits across later snapshots", () => {
    let s = applyStream(initialState(), snapEvent(1, miSnapshot(1)));
    s = withForm(s, { threshold: "0.2" });
    s = applyStream(s, snapEvent(2, miSnapshot(2)));
    expect(s.snapshot?.seq).toBe(2);
    expect(s.form.threshold).toBe("0.2");
  });

  it("records a gap and clears it on the next snapshot", () => {
    let s = applyStream(initialState(), snapEvent(1));
    s = applyStream(s, { type: "gap", missed_from: 2, missed_to: 4, seq: 5 });
    expect(s.gap).toEqual({ from: 2, to: 4 });
    s = applyStream(s, snapEvent(5));
    expect(s.gap).toBeNull();
    expect(s.snapshot?.seq).toBe(5);
  });
});

describe("panel toggles", () => {
  it("drill toggles off when the same cell is clicked again", () => {
    const s0 = initialState();
    const s1 = withDrill(s0, "X", "C");
    expect(s1.drill).toEqual({ row: "X", col: "C" });
    const s2 = withDrill(s1, "X", "C");
    expect(s2.drill).toBeNull();
    const s3 = withDrill(s1, "X", "X");
    expect(s3.drill).toEqual({ row: "X", col: "X" });
  });

  it("sql panel toggles per node", () => {
    const s1 = withSqlNode(initialState(), "V_R");
    expect(s1.sqlNode).toBe("V_R");
    expect(withSqlNode(s1, "V_R").sqlNode).toBeNull();
    expect(withSqlNode(s1, "V_S").sqlNode).toBe("V_S");
  });
});

describe("steer lifecycle", () => {
  it("pending -> accepted keeps the ack seq and clears errors", () => {
    let s = steerStarted(initialState());
    expect(s.steerPending).toBe(true);
    s = steerAccepted(s, 7);
    expect(s.steerPending).toBe(false);
    expect(s.steerAck).toBe(7);
    expect(s.steerError).toBeNull();
  });

  it("pending -> rejected surfaces the detail", () => {
    let s = steerStarted(initialState());
    s = steerRejected(s, "unknown attribute 'Z'");
    expect(s.steerPending).toBe(false);
    expect(s.steerError).toBe("unknown attribute 'Z'");
  });
});

describe("buildSteer", () => {
  const form = initialState().form;

  it("builds numeric bodies only from parseable input", () => {
    expect(buildSteer("threshold", { ...form, threshold: "0.25" })).toEqual({
      type: "set_threshold",
      value: 0.25,
    });
    expect(buildSteer("threshold", { ...form, threshold: "abc" })).toBeNull();
    expect(buildSteer("lambda", { ...form, lambda: "1e-3" })).toEqual({
      type: "set_lambda",
      value: 0.001,
    });
    expect(buildSteer("lambda", { ...form, lambda: "" })).toEqual({
      type: "set_lambda",
      value: 0, // Number("") === 0; the engine rejects negatives, not zero
    });
  });

  it("requires a label and maps 'all features' to null", () => {
    expect(buildSteer("label", { ...form, label: "" })).toBeNull();
    expect(buildSteer("label", { ...form, label: "Y" })).toEqual({
      type: "set_label",
      value: "Y",
    });
    expect(buildSteer("features", { ...form, allFeatures: true })).toEqual({
      type: "set_features",
      value: null,
    });
    expect(
      buildSteer("features", { ...form, allFeatures: false, features: ["X", "C"] }),
    ).toEqual({ type: "set_features", value: ["X", "C"] });
  });

  it("passes pause and resume through unchanged", () => {
    expect(buildSteer("pause", form)).toEqual({ type: "pause" });
    expect(buildSteer("resume", form)).toEqual({ type: "resume" });
  });
});
