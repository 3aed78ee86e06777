import { describe, expect, it } from 'vitest';

import {
  MAX_MESSAGES_PER_SECOND,
  MessageThrottle,
  SEND_INTERVAL_MS,
  buildHello,
  buildReset,
  buildTarget,
  serializeMessage
} from '../src/messages';
import { outgoingMessageSchema } from '../src/schema';

describe('message builders', () => {
  it('produce schema-valid wire objects with protocol defaults', () => {
    const hello = buildHello();
    expect(hello.version).toBe(1);
    const target = buildTarget({ kind: 'point', target: [1, 0.5] });
    const reset = buildReset([0.1, 0.2, 0.3]);
    for (const msg of [hello, target, reset]) {
      expect(() => outgoingMessageSchema.parse(msg)).not.toThrow();
    }
  });

  it('serializeMessage re-validates, so a corrupted object cannot reach the wire', () => {
    const bad = { type: 'target', set: { kind: 'plane', normal: [0, 0], offset: 0, side: 'on' } };
    expect(() => serializeMessage(bad as never)).toThrow();
  });

  it('round-trips through JSON intact', () => {
    const target = buildTarget({
      kind: 'rectangle',
      center: [0.3, -0.2],
      length: 0.8,
      width: 0.4,
      angle: 0.6,
      region: 'out'
    });
    expect(JSON.parse(serializeMessage(target))).toEqual(target);
  });
});

describe('message throttle', () => {
  it('caps a fast drag at the protocol rate', () => {
    const throttle = new MessageThrottle();
    let sent = 0;
    // 4 ms pointer events for one second, i.e. 250 offered messages
    for (let t = 0; t <= 1000; t += 4) {
      if (throttle.offer(buildTarget({ kind: 'point', target: [t / 1000, 0] }), t) !== null) {
        sent += 1;
      }
      const flushed = throttle.flush(t);
      if (flushed !== null) {
        sent += 1;
      }
    }
    expect(sent).toBeLessThanOrEqual(MAX_MESSAGES_PER_SECOND + 1);
    expect(sent).toBeGreaterThan(MAX_MESSAGES_PER_SECOND / 2);
  });

  it('always delivers the final pointer position', () => {
    const throttle = new MessageThrottle();
    expect(throttle.offer(buildTarget({ kind: 'point', target: [0, 0] }), 0)).not.toBeNull();
    // burst lands inside the window: each message supersedes the previous
    expect(throttle.offer(buildTarget({ kind: 'point', target: [1, 0] }), 5)).toBeNull();
    expect(throttle.offer(buildTarget({ kind: 'point', target: [2, 0] }), 10)).toBeNull();
    expect(throttle.hasTrailing).toBe(true);
    // nothing until the window elapses
    expect(throttle.flush(SEND_INTERVAL_MS - 1)).toBeNull();
    const released = throttle.flush(SEND_INTERVAL_MS + 1);
    expect(released).not.toBeNull();
    expect(released?.type === 'target' && released.set.kind === 'point' && released.set.target).toEqual([2, 0]);
    expect(throttle.hasTrailing).toBe(false);
  });

  it('messages stay strictly ordered: a released trailing message is older than a later direct send', () => {
    const throttle = new MessageThrottle();
    const sentOrder: number[] = [];
    const mark = (id: number, msg: ReturnType<typeof buildTarget> | null): void => {
      if (msg !== null) {
        sentOrder.push(id);
      }
    };
    mark(0, throttle.offer(buildTarget({ kind: 'point', target: [0, 0] }), 0));
    mark(1, throttle.offer(buildTarget({ kind: 'point', target: [1, 0] }), 10));
    mark(2, throttle.flush(40) as ReturnType<typeof buildTarget> | null);
    mark(3, throttle.offer(buildTarget({ kind: 'point', target: [3, 0] }), 80));
    expect(sentOrder).toEqual([0, 2, 3]);
  });
});
