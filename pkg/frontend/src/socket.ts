// Reconnecting websocket wrapper with an injectable socket factory so the
// protocol machinery is testable without a browser or a live server.

export interface SocketLike {
  onopen: (() => void) | null;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  send(data: string): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface FleetSocketHandlers {
  onMessage: (raw: string) => void;
  onStatus: (status: "connecting" | "open" | "closed") => void;
}

const BACKOFF_BASE_MS = 500;
const BACKOFF_CAP_MS = 10_000;

export class FleetSocket {
  private socket: SocketLike | null = null;
  private attempts = 0;
  private closedByUser = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly url: string,
    private readonly handlers: FleetSocketHandlers,
    private readonly factory: SocketFactory =
      (u) => new WebSocket(u) as unknown as SocketLike,
  ) {}

  connect(): void {
    this.handlers.onStatus("connecting");
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
      this.handlers.onStatus("open");
    };
    socket.onmessage = (event) => this.handlers.onMessage(event.data);
    socket.onclose = () => this.scheduleReconnect();
    socket.onerror = () => { /* close always follows */ };
  }

  private scheduleReconnect(): void {
    this.socket = null;
    this.handlers.onStatus("closed");
    if (this.closedByUser) return;
    const delay = Math.min(BACKOFF_CAP_MS,
                           BACKOFF_BASE_MS * 2 ** this.attempts);
    this.attempts += 1;
    this.reconnectTimer = setTimeout(() => this.connect(), delay);
  }

  send(message: object): boolean {
    if (this.socket === null) return false;
    try {
      this.socket.send(JSON.stringify(message));
      return true;
    } catch {
      return false;
    }
  }

  close(): void {
    this.closedByUser = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.socket?.close();
  }
}
