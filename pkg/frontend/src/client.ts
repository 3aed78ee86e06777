// WebSocket client: one connection, strictly ordered sends through the
// throttle, replies parsed and folded into the scene state. The socket is
// injectable so tests can run without a browser.

import { MessageThrottle, serializeMessage } from './messages';
import type { SceneState } from './scene';
import { applyReply, createSceneState, setConnection } from './scene';
import type { OutgoingMessage } from './schema';
import { replySchema } from './schema';

// The subset of the WebSocket interface the client uses.
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

const defaultSocketFactory: SocketFactory = (url) => new WebSocket(url) as unknown as SocketLike;

export class PlaygroundClient {
  private socket: SocketLike | null = null;
  private readonly throttle = new MessageThrottle();
  private readonly now: () => number;
  private readonly makeSocket: SocketFactory;

  state: SceneState = createSceneState();
  onChange: ((state: SceneState) => void) | null = null;

  constructor(
    private readonly url: string,
    options: { socketFactory?: SocketFactory; now?: () => number } = {}
  ) {
    this.makeSocket = options.socketFactory ?? defaultSocketFactory;
    this.now = options.now ?? (() => performance.now());
  }

  connect(): void {
    this.update(setConnection(this.state, 'connecting'));
    const socket = this.makeSocket(this.url);
    socket.onopen = () => {
      this.update(setConnection(this.state, 'live'));
    };
    socket.onmessage = (event) => {
      const reply = replySchema.parse(JSON.parse(event.data));
      this.update(applyReply(this.state, reply));
    };
    socket.onclose = () => {
      this.update(setConnection(this.state, 'closed'));
      this.socket = null;
    };
    this.socket = socket;
  }

  close(): void {
    this.socket?.close();
  }

  // Rate-limited send; drag ticks that land inside the window supersede each
  // other and the latest one goes out when tick() next runs.
  send(message: OutgoingMessage): void {
    const ready = this.throttle.offer(message, this.now());
    if (ready !== null) {
      this.transmit(ready);
    }
  }

  // Bypass the throttle for one-shot messages (hello, reset).
  sendNow(message: OutgoingMessage): void {
    this.transmit(message);
  }

  // Call once per animation frame to release a trailing drag message.
  tick(): void {
    const pending = this.throttle.flush(this.now());
    if (pending !== null) {
      this.transmit(pending);
    }
  }

  update(state: SceneState): void {
    this.state = state;
    this.onChange?.(state);
  }

  private transmit(message: OutgoingMessage): void {
    this.socket?.send(serializeMessage(message));
  }
}
