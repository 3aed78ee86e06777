// Outgoing message construction and rate limiting.
//
// Every builder round-trips its result through the zod schema, so anything
// this module hands to the socket is schema-valid by construction. The
// throttle keeps the send rate at or below MAX_MESSAGES_PER_SECOND and always
// delivers the latest pending message once the window opens (drag ticks in
// between are superseded, never queued).

import type { HelloMessage, OutgoingMessage, ResetMessage, SetSpec, TargetMessage } from './schema';
import {
  helloMessageSchema,
  outgoingMessageSchema,
  resetMessageSchema,
  targetMessageSchema
} from './schema';

export const MAX_MESSAGES_PER_SECOND = 30;
export const SEND_INTERVAL_MS = 1000 / MAX_MESSAGES_PER_SECOND;

export function buildHello(arm?: HelloMessage['arm'], q0?: number[]): HelloMessage {
  return helloMessageSchema.parse({
    type: 'hello',
    ...(arm ? { arm } : {}),
    ...(q0 ? { q0 } : {})
  });
}

export function buildTarget(set: SetSpec): TargetMessage {
  return targetMessageSchema.parse({ type: 'target', set });
}

export function buildReset(q?: number[]): ResetMessage {
  return resetMessageSchema.parse({ type: 'reset', ...(q ? { q } : {}) });
}

export function serializeMessage(message: OutgoingMessage): string {
  return JSON.stringify(outgoingMessageSchema.parse(message));
}

export class MessageThrottle {
  private readonly intervalMs: number;
  private lastSentAt = Number.NEGATIVE_INFINITY;
  private trailing: OutgoingMessage | null = null;

  constructor(intervalMs: number = SEND_INTERVAL_MS) {
    this.intervalMs = intervalMs;
  }

  // Offer a message at time nowMs. Returns the message to send right away,
  // or null when the rate limit holds it back (it becomes the trailing
  // message, replacing any previous one).
  offer(message: OutgoingMessage, nowMs: number): OutgoingMessage | null {
    if (nowMs - this.lastSentAt >= this.intervalMs) {
      this.lastSentAt = nowMs;
      this.trailing = null;
      return message;
    }
    this.trailing = message;
    return null;
  }

  // Poll from the render loop: releases the trailing message once the window
  // has elapsed, so the final pointer position always reaches the service.
  flush(nowMs: number): OutgoingMessage | null {
    if (this.trailing === null || nowMs - this.lastSentAt < this.intervalMs) {
      return null;
    }
    const message = this.trailing;
    this.trailing = null;
    this.lastSentAt = nowMs;
    return message;
  }

  get hasTrailing(): boolean {
    return this.trailing !== null;
  }
}
