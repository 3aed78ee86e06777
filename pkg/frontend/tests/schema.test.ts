import { describe, expect, it } from 'vitest';

import {
  helloMessageSchema,
  outgoingMessageSchema,
  replySchema,
  setSpecDim,
  setSpecSchema,
  targetMessageSchema
} from '../src/schema';

describe('set descriptor schemas', () => {
  it('accepts each variant and fills defaults like the service does', () => {
    const plane = setSpecSchema.parse({ kind: 'plane', normal: [0, 1] });
    expect(plane).toEqual({ kind: 'plane', normal: [0, 1], offset: 0, side: 'on' });

    const circle = setSpecSchema.parse({ kind: 'circle', center: [1, 2], r_outer: 0.5 });
    expect(circle.kind === 'circle' && circle.r_inner).toBe(0);

    const rect = setSpecSchema.parse({
      kind: 'rectangle',
      center: [0, 0],
      length: 1,
      width: 0.5
    });
    expect(rect.kind === 'rectangle' && rect.region).toBe('in');
  });

  it('rejects unknown fields, matching the strict server models', () => {
    expect(() => setSpecSchema.parse({ kind: 'point', target: [1, 2], extra: 1 })).toThrow();
  });

  it('enforces the cross-field rules', () => {
    expect(() => setSpecSchema.parse({ kind: 'plane', normal: [0, 0] })).toThrow(/nonzero/);
    expect(() =>
      setSpecSchema.parse({ kind: 'circle', center: [0, 0], r_outer: 0.2, r_inner: 0.5 })
    ).toThrow(/r_inner/);
    expect(() =>
      setSpecSchema.parse({ kind: 'box', lower: [0, 0], upper: [-1, 1] })
    ).toThrow(/lower > upper/);
    expect(() =>
      setSpecSchema.parse({ kind: 'rectangle', center: [0, 0], length: -1, width: 0.5 })
    ).toThrow();
  });

  it('computes the ambient dimension per variant', () => {
    expect(setSpecDim({ kind: 'point', target: [1, 2, 3] })).toBe(3);
    expect(setSpecDim({ kind: 'plane', normal: [1, 0], offset: 0, side: 'on' })).toBe(2);
    expect(
      setSpecDim({ kind: 'rectangle', center: [0, 0], length: 1, width: 1, angle: 0, region: 'in' })
    ).toBe(2);
  });
});

describe('message schemas', () => {
  it('hello defaults match the wire protocol', () => {
    const hello = helloMessageSchema.parse({ type: 'hello' });
    expect(hello).toEqual({ type: 'hello', version: 1, arm: null, q0: null });
  });

  it('target messages must live in the planar task space', () => {
    expect(() =>
      targetMessageSchema.parse({ type: 'target', set: { kind: 'point', target: [1, 2, 3] } })
    ).toThrow(/planar/);
    const ok = targetMessageSchema.parse({
      type: 'target',
      set: { kind: 'point', target: [1, 2] }
    });
    expect(ok.set.kind).toBe('point');
  });

  it('rejects messages with a bogus type tag', () => {
    expect(() => outgoingMessageSchema.parse({ type: 'wiggle' })).toThrow();
  });

  it('parses the reply union by tag', () => {
    const state = replySchema.parse({
      type: 'state',
      seq: 3,
      q: [0.1, 0.2, 0.3],
      ee: [1, 1],
      ee_path: [[1, 1]],
      residual: 0.05,
      counters: { n_f: 4, n_grad: 4, n_jac: 2 },
      budget: false,
      elapsed_ms: 3.2
    });
    expect(state.type).toBe('state');
    const err = replySchema.parse({ type: 'error', message: 'nope' });
    expect(err.type === 'error' && err.detail).toEqual([]);
  });
});
