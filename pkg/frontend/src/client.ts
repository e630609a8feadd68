/**
 * Socket client for the console protocol: connect, auto-reconnect, send
 * operator commands.  While disconnected, at most one command is queued;
 * further sends are refused with a notice so the operator never builds up a
 * surprise backlog.
 */

import * as net from "node:net";
import { EventEmitter } from "node:events";

import {
  LineSplitter,
  OperatorCommand,
  ServerMessage,
  encodeCommand,
  parseMessage,
} from "./protocol.js";

export interface ClientOptions {
  host: string;
  port: number;
  reconnectDelayMs?: number;
}

export declare interface ConsoleClient {
  on(event: "message", listener: (msg: ServerMessage, line: string) => void): this;
  on(event: "connect", listener: () => void): this;
  on(event: "disconnect", listener: () => void): this;
  on(event: "notice", listener: (text: string) => void): this;
}

export class ConsoleClient extends EventEmitter {
  private socket: net.Socket | null = null;
  private splitter = new LineSplitter();
  private pendingOffline: OperatorCommand | null = null;
  private closed = false;
  connected = false;

  constructor(private readonly options: ClientOptions) {
    super();
  }

  connect(): void {
    if (this.closed) return;
    const socket = net.createConnection(this.options.port, this.options.host);
    this.socket = socket;
    socket.setEncoding("utf-8");
    socket.on("connect", () => {
      this.connected = true;
      this.splitter = new LineSplitter();
      this.emit("connect");
      if (this.pendingOffline) {
        const queued = this.pendingOffline;
        this.pendingOffline = null;
        this.send(queued);
        this.emit("notice", `sent queued command: ${queued.cmd}`);
      }
    });
    socket.on("data", (chunk: string) => {
      for (const line of this.splitter.push(chunk)) {
        const msg = parseMessage(line);
        if (msg) this.emit("message", msg, line);
      }
    });
    const onGone = () => {
      if (!this.socket) return;
      this.socket = null;
      if (this.connected) {
        this.connected = false;
        this.emit("disconnect");
      }
      if (!this.closed) {
        setTimeout(() => this.connect(), this.options.reconnectDelayMs ?? 1000);
      }
    };
    socket.on("error", onGone);
    socket.on("close", onGone);
  }

  /** Returns true when the command went out (or was queued as the one spare). */
  send(command: OperatorCommand): boolean {
    if (this.connected && this.socket) {
      this.socket.write(encodeCommand(command));
      return true;
    }
    if (this.pendingOffline === null) {
      this.pendingOffline = command;
      this.emit("notice", `disconnected: queued ${command.cmd}`);
      return true;
    }
    this.emit("notice", `disconnected: refused ${command.cmd} (one command already queued)`);
    return false;
  }

  close(): void {
    this.closed = true;
    if (this.socket) {
      this.socket.destroy();
      this.socket = null;
    }
  }
}
