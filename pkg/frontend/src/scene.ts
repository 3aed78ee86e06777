// Scene state and its reducer. The state is a plain value and every update
// returns a fresh object, so replaying a reply log is deterministic and the
// render loop can diff by identity.
//
// Invariant: q and ee only ever come from service replies. The client never
// integrates or re-solves anything; between replies it just re-renders the
// last known pose (with the in-flight set drawn as pending).

import type { Reply, SetSpec, StateReply, WelcomeReply } from './schema';
import type { Vec2 } from './transform';
import { fromArray } from './transform';

export type ConnectionStatus = 'idle' | 'connecting' | 'live' | 'closed';

export type SceneState = {
  connection: ConnectionStatus;
  linkLengths: number[];
  q: number[];
  ee: Vec2;
  eePath: Vec2[];
  set: SetSpec | null;
  // True from the moment a set edit is sent until the next state reply.
  pending: boolean;
  residual: number | null;
  counters: Record<string, number>;
  budget: boolean;
  seq: number;
  infeasible: boolean;
  lastError: string | null;
};

// Residual plateau detection: the target counts as unreachable when the
// residual is still large and has stopped moving between replies.
const INFEASIBLE_RESIDUAL = 1e-3;
const PLATEAU_DELTA = 1e-7;

export function createSceneState(): SceneState {
  return {
    connection: 'idle',
    linkLengths: [],
    q: [],
    ee: { x: 0, y: 0 },
    eePath: [],
    set: null,
    pending: false,
    residual: null,
    counters: {},
    budget: false,
    seq: 0,
    infeasible: false,
    lastError: null
  };
}

export function setConnection(state: SceneState, connection: ConnectionStatus): SceneState {
  return { ...state, connection };
}

// Record a locally edited set before the service has confirmed it. Switching
// to a different set kind starts a fresh episode, so the tip trace clears
// immediately (the service does the same on its side).
export function markPending(state: SceneState, set: SetSpec): SceneState {
  const kindChanged = state.set !== null && state.set.kind !== set.kind;
  return {
    ...state,
    set,
    pending: true,
    infeasible: false,
    eePath: kindChanged ? [] : state.eePath
  };
}

function applyWelcome(state: SceneState, reply: WelcomeReply): SceneState {
  return {
    ...state,
    connection: 'live',
    linkLengths: [...reply.link_lengths],
    q: [...reply.q],
    ee: fromArray(reply.ee),
    eePath: [fromArray(reply.ee)],
    set: null,
    pending: false,
    residual: null,
    counters: {},
    budget: false,
    seq: 0,
    infeasible: false,
    lastError: null
  };
}

function applyState(state: SceneState, reply: StateReply): SceneState {
  const plateaued =
    state.residual !== null &&
    reply.residual > INFEASIBLE_RESIDUAL &&
    Math.abs(reply.residual - state.residual) < PLATEAU_DELTA;
  return {
    ...state,
    q: [...reply.q],
    ee: fromArray(reply.ee),
    eePath: reply.ee_path.map(fromArray),
    pending: false,
    residual: reply.residual,
    counters: { ...reply.counters },
    budget: reply.budget,
    seq: reply.seq,
    infeasible: plateaued,
    lastError: null
  };
}

export function applyReply(state: SceneState, reply: Reply): SceneState {
  switch (reply.type) {
    case 'welcome':
      return applyWelcome(state, reply);
    case 'state':
      return applyState(state, reply);
    case 'error':
      return { ...state, pending: false, lastError: reply.message };
  }
}
