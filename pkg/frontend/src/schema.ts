// Zod mirror of the playground wire protocol (see GET /schemas/playground on
// the service). Field names and defaults match the service schemas exactly;
// every outgoing message is parsed through these before it is sent, so a
// client bug surfaces locally instead of as a server-side error reply.

import { z } from 'zod';

export const PROTOCOL_VERSION = 1;
export const BUDGET_MS = 20.0;
export const TASK_DIM = 2;

// ------------------------------------------------------------ set descriptors

export const pointSetSchema = z
  .object({
    kind: z.literal('point'),
    target: z.array(z.number())
  })
  .strict();

export const planeSetSchema = z
  .object({
    kind: z.literal('plane'),
    normal: z.array(z.number()),
    offset: z.number().default(0),
    side: z.enum(['on', 'below', 'above']).default('on')
  })
  .strict();

export const circleSetSchema = z
  .object({
    kind: z.literal('circle'),
    center: z.array(z.number()),
    r_outer: z.number(),
    r_inner: z.number().default(0)
  })
  .strict();

export const rectangleSetSchema = z
  .object({
    kind: z.literal('rectangle'),
    center: z.array(z.number()).length(2),
    length: z.number().positive(),
    width: z.number().positive(),
    angle: z.number().default(0),
    region: z.enum(['in', 'out']).default('in')
  })
  .strict();

export const boxSetSchema = z
  .object({
    kind: z.literal('box'),
    lower: z.array(z.number().nullable()),
    upper: z.array(z.number().nullable())
  })
  .strict();

// Cross-field rules the object schemas cannot express, matching the service
// validators one for one.
function checkSetSpec(spec: SetSpec, ctx: z.RefinementCtx): void {
  if (spec.kind === 'plane' && spec.normal.every((v) => v === 0)) {
    ctx.addIssue({ code: z.ZodIssueCode.custom, message: 'plane normal must be nonzero' });
  }
  if (spec.kind === 'circle' && !(0 <= spec.r_inner && spec.r_inner <= spec.r_outer)) {
    ctx.addIssue({ code: z.ZodIssueCode.custom, message: 'need 0 <= r_inner <= r_outer' });
  }
  if (spec.kind === 'box') {
    if (spec.lower.length !== spec.upper.length) {
      ctx.addIssue({ code: z.ZodIssueCode.custom, message: 'box lower/upper lengths differ' });
    } else {
      for (let i = 0; i < spec.lower.length; i += 1) {
        const lo = spec.lower[i];
        const hi = spec.upper[i];
        if (lo != null && hi != null && lo > hi) {
          ctx.addIssue({ code: z.ZodIssueCode.custom, message: 'box has lower > upper' });
        }
      }
    }
  }
}

const setSpecUnion = z.discriminatedUnion('kind', [
  pointSetSchema,
  planeSetSchema,
  circleSetSchema,
  rectangleSetSchema,
  boxSetSchema
]);

export const setSpecSchema = setSpecUnion.superRefine(checkSetSpec);

export type SetSpec = z.infer<typeof setSpecUnion>;
export type PointSet = z.infer<typeof pointSetSchema>;
export type PlaneSet = z.infer<typeof planeSetSchema>;
export type CircleSet = z.infer<typeof circleSetSchema>;
export type RectangleSet = z.infer<typeof rectangleSetSchema>;

// Ambient dimension a descriptor constrains (same rule as the service).
export function setSpecDim(spec: SetSpec): number {
  switch (spec.kind) {
    case 'point':
      return spec.target.length;
    case 'plane':
      return spec.normal.length;
    case 'circle':
      return spec.center.length;
    case 'rectangle':
      return 2;
    case 'box':
      return spec.lower.length;
  }
}

// ----------------------------------------------------------- client -> server

export const planarArmSchema = z
  .object({
    name: z.literal('planar_arm').default('planar_arm'),
    link_lengths: z.array(z.number().positive()).default([1, 1, 1]),
    joint_limit: z.number().positive().nullable().default(null)
  })
  .strict();

export const helloMessageSchema = z
  .object({
    type: z.literal('hello'),
    version: z.literal(PROTOCOL_VERSION).default(PROTOCOL_VERSION),
    arm: planarArmSchema.nullable().default(null),
    q0: z.array(z.number()).nullable().default(null)
  })
  .strict();

export const targetMessageSchema = z
  .object({
    type: z.literal('target'),
    set: setSpecSchema
  })
  .strict()
  .refine((m) => setSpecDim(m.set) === TASK_DIM, {
    message: 'set must live in the planar task space'
  });

export const resetMessageSchema = z
  .object({
    type: z.literal('reset'),
    q: z.array(z.number()).nullable().default(null)
  })
  .strict();

export const outgoingMessageSchema = z.union([
  helloMessageSchema,
  targetMessageSchema,
  resetMessageSchema
]);

export type HelloMessage = z.infer<typeof helloMessageSchema>;
export type TargetMessage = z.infer<typeof targetMessageSchema>;
export type ResetMessage = z.infer<typeof resetMessageSchema>;
export type OutgoingMessage = z.infer<typeof outgoingMessageSchema>;

// ----------------------------------------------------------- server -> client

export const welcomeReplySchema = z
  .object({
    type: z.literal('welcome'),
    version: z.number(),
    budget_ms: z.number(),
    link_lengths: z.array(z.number()),
    q: z.array(z.number()),
    ee: z.array(z.number()).length(2)
  })
  .strict();

export const stateReplySchema = z
  .object({
    type: z.literal('state'),
    seq: z.number().int(),
    q: z.array(z.number()),
    ee: z.array(z.number()).length(2),
    ee_path: z.array(z.array(z.number()).length(2)),
    residual: z.number(),
    counters: z.record(z.number().int()),
    budget: z.boolean(),
    elapsed_ms: z.number()
  })
  .strict();

export const errorReplySchema = z
  .object({
    type: z.literal('error'),
    message: z.string(),
    detail: z.array(z.string()).default([])
  })
  .strict();

export const replySchema = z.discriminatedUnion('type', [
  welcomeReplySchema,
  stateReplySchema,
  errorReplySchema
]);

export type WelcomeReply = z.infer<typeof welcomeReplySchema>;
export type StateReply = z.infer<typeof stateReplySchema>;
export type ErrorReply = z.infer<typeof errorReplySchema>;
export type Reply = z.infer<typeof replySchema>;
