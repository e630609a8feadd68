/**
 * Wire protocol types and line framing for the session console socket.
 *
 * The server speaks newline-delimited JSON: a one-line handshake, then one
 * session event per line, interleaved with command replies and drop notices.
 */

export interface Handshake {
  format: string;
  version: number;
}

export interface SessionEvent {
  seq: number;
  t: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface CommandReply {
  reply: "ok" | "error";
  seq: number;
  cmd?: string;
  message?: string;
}

export interface DropNotice {
  kind: "dropped";
  count: number;
}

export type ServerMessage = Handshake | SessionEvent | CommandReply | DropNotice;

export type OperatorCommand =
  | { cmd: "inject_par" }
  | { cmd: "inject_mi"; label: string }
  | { cmd: "press_button" }
  | { cmd: "pause" }
  | { cmd: "resume" }
  | { cmd: "set_speed"; factor: number };

export function isSessionEvent(msg: ServerMessage): msg is SessionEvent {
  return "seq" in msg && "kind" in msg && "payload" in msg;
}

export function isReply(msg: ServerMessage): msg is CommandReply {
  return "reply" in msg;
}

export function isDropNotice(msg: ServerMessage): msg is DropNotice {
  return "kind" in msg && (msg as DropNotice).kind === "dropped" && !("seq" in msg);
}

export function isHandshake(msg: ServerMessage): msg is Handshake {
  return "format" in msg && "version" in msg;
}

/** Accumulates socket chunks and yields complete JSON lines. */
export class LineSplitter {
  private buffer = "";

  push(chunk: string): string[] {
    this.buffer += chunk;
    const lines = this.buffer.split("\n");
    this.buffer = lines.pop() ?? "";
    return lines.filter((l) => l.trim().length > 0);
  }
}

export function parseMessage(line: string): ServerMessage | null {
  try {
    const doc = JSON.parse(line);
    if (doc && typeof doc === "object") return doc as ServerMessage;
    return null;
  } catch {
    return null;
  }
}

export function encodeCommand(command: OperatorCommand): string {
  return JSON.stringify(command) + "\n";
}
