// WebSocket lifecycle for one session. Reconnects resume from the highest
// seq the model has applied (?since=), and the model's seq dedup makes any
// overlap harmless, so a drop mid-interaction loses nothing and repeats
// nothing.

import { ControlPayload, WireMessage, parseWireMessage } from './protocol';

// minimal surface so tests can substitute a fake and node can pass `ws`
export interface SocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(type: string, listener: (event: any) => void): void;
}

export interface ConnectionOptions {
  socketFactory?: (url: string) => SocketLike;
  reconnectDelayMs?: number;
}

export class SessionConnection {
  readonly sessionId: string;
  private wsBase: string;
  private onMessage: (message: WireMessage) => void;
  private sinceProvider: () => number;
  private socketFactory: (url: string) => SocketLike;
  private reconnectDelayMs: number;
  private socket: SocketLike | null = null;
  private closed = false;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  onStatusChange: (connected: boolean) => void = () => {};

  constructor(
    wsBase: string,
    sessionId: string,
    sinceProvider: () => number,
    onMessage: (message: WireMessage) => void,
    options: ConnectionOptions = {},
  ) {
    this.wsBase = wsBase.replace(/\/$/, '');
    this.sessionId = sessionId;
    this.sinceProvider = sinceProvider;
    this.onMessage = onMessage;
    this.socketFactory = options.socketFactory ?? ((url) => new WebSocket(url) as SocketLike);
    this.reconnectDelayMs = options.reconnectDelayMs ?? 500;
  }

  url(): string {
    return `${this.wsBase}/sessions/${this.sessionId}/ws?since=${this.sinceProvider()}`;
  }

  connect(): void {
    if (this.closed) return;
    const socket = this.socketFactory(this.url());
    this.socket = socket;
    socket.addEventListener('open', () => this.onStatusChange(true));
    socket.addEventListener('message', (event: { data: unknown }) => {
      const message = parseWireMessage(event.data);
      if (message) this.onMessage(message);
    });
    socket.addEventListener('close', () => {
      this.onStatusChange(false);
      if (this.socket === socket) this.socket = null;
      this.scheduleReconnect();
    });
    socket.addEventListener('error', () => {});
  }

  private scheduleReconnect(): void {
    if (this.closed || this.retryTimer !== null) return;
    this.retryTimer = setTimeout(() => {
      this.retryTimer = null;
      this.connect();
    }, this.reconnectDelayMs);
  }

  private send(type: 'utterance_submit' | 'control', payload: object): void {
    this.socket?.send(JSON.stringify({ type, payload }));
  }

  submitUtterance(speaker: string, listener: string, text: string): void {
    this.send('utterance_submit', { speaker, listener, text });
  }

  sendControl(payload: ControlPayload): void {
    this.send('control', payload);
  }

  close(): void {
    this.closed = true;
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    this.socket?.close();
    this.socket = null;
  }
}
