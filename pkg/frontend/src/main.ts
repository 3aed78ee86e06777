// Browser entry point: wires the canvas, the mode switcher, and the pointer
// handlers to a PlaygroundClient. Everything interesting lives in the pure
// modules; this file is DOM plumbing only.

import { PlaygroundClient } from './client';
import type { DragHandle, SetVariant } from './drag';
import { ARENA, defaultSet, dragUpdate, toggleCircleMode, toggleRectangleRegion } from './drag';
import { buildReset, buildTarget } from './messages';
import { markPending } from './scene';
import { renderScene } from './render';
import type { Draw2D } from './render';
import { fitArena } from './transform';

const WS_PATH = '/playground';

function serviceUrl(): string {
  const scheme = location.protocol === 'https:' ? 'wss' : 'ws';
  return `${scheme}://${location.host}${WS_PATH}`;
}

function setup(): void {
  const canvas = document.getElementById('scene') as HTMLCanvasElement;
  const ctx = canvas.getContext('2d') as unknown as Draw2D;
  const view = fitArena(ARENA, canvas.width, canvas.height);

  const client = new PlaygroundClient(serviceUrl());
  let activeHandle: DragHandle | null = null;

  const switchVariant = (variant: SetVariant): void => {
    const set = defaultSet(variant, client.state.ee);
    client.update(markPending(client.state, set));
    client.send(buildTarget(set));
  };

  for (const variant of ['point', 'plane', 'circle', 'rectangle'] as SetVariant[]) {
    document.getElementById(`mode-${variant}`)?.addEventListener('click', () => {
      switchVariant(variant);
    });
  }

  document.getElementById('toggle-region')?.addEventListener('click', () => {
    const set = client.state.set;
    if (set === null) {
      return;
    }
    let updated = set;
    if (set.kind === 'circle') {
      const mode = set.r_inner === 0 ? 'on' : set.r_inner === set.r_outer ? 'outside' : 'inside';
      updated = toggleCircleMode(set, mode);
    } else if (set.kind === 'rectangle') {
      updated = toggleRectangleRegion(set, set.region === 'in' ? 'out' : 'in');
    }
    if (updated !== set) {
      client.update(markPending(client.state, updated));
      client.send(buildTarget(updated));
    }
  });

  document.getElementById('reset')?.addEventListener('click', () => {
    client.sendNow(buildReset());
  });

  const handleForSet = (shiftKey: boolean): DragHandle | null => {
    const set = client.state.set;
    if (set === null) {
      return null;
    }
    switch (set.kind) {
      case 'point':
        return { variant: 'point' };
      case 'plane':
        return { variant: 'plane', part: 'normal' };
      case 'circle':
        return { variant: 'circle', part: shiftKey ? 'radius' : 'center' };
      case 'rectangle':
        return { variant: 'rectangle', part: shiftKey ? 'corner' : 'center' };
      default:
        return null;
    }
  };

  const pointerWorldDrag = (event: PointerEvent): void => {
    const set = client.state.set;
    if (activeHandle === null || set === null) {
      return;
    }
    const rect = canvas.getBoundingClientRect();
    const screen = { x: event.clientX - rect.left, y: event.clientY - rect.top };
    const { message, set: updated } = dragUpdate(set, activeHandle, screen, view);
    client.update(markPending(client.state, updated));
    client.send(message);
  };

  canvas.addEventListener('pointerdown', (event) => {
    if (client.state.set === null) {
      switchVariant('point');
    }
    activeHandle = handleForSet(event.shiftKey);
    canvas.setPointerCapture(event.pointerId);
    pointerWorldDrag(event);
  });
  canvas.addEventListener('pointermove', pointerWorldDrag);
  canvas.addEventListener('pointerup', () => {
    activeHandle = null;
  });

  const frame = (): void => {
    client.tick();
    renderScene(ctx, client.state, view, canvas.width, canvas.height);
    requestAnimationFrame(frame);
  };

  client.connect();
  requestAnimationFrame(frame);
}

if (typeof document !== 'undefined') {
  setup();
}
