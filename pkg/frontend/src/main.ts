/**
 * Live operator console.
 *
 *   node dist/main.js --endpoint 127.0.0.1:7788 [--dump events.jsonl]
 *                     [--mi-label right_hand] [--fps 10]
 *
 * Renders the session's menu/traces in the terminal and injects operator
 * commands.  With --dump, every received line is appended to a file (used
 * to cross-check the console against the engine's own log).
 */

import * as fs from "node:fs";
import * as process from "node:process";

import { ConsoleClient } from "./client.js";
import { paint, renderFrame } from "./render.js";
import { ConsoleViewModel } from "./viewmodel.js";
import { isSessionEvent } from "./protocol.js";

interface Args {
  host: string;
  port: number;
  dump: string | null;
  miLabel: string;
  fps: number;
}

function parseArgs(argv: string[]): Args {
  const args: Args = { host: "127.0.0.1", port: 7788, dump: null, miLabel: "right_hand", fps: 10 };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    if (flag === "--endpoint") {
      const value = argv[++i] ?? "";
      const sep = value.lastIndexOf(":");
      if (sep < 0) throw new Error(`--endpoint needs host:port, got ${value}`);
      args.host = value.slice(0, sep) || "127.0.0.1";
      args.port = Number(value.slice(sep + 1));
    } else if (flag === "--dump") {
      args.dump = argv[++i] ?? null;
    } else if (flag === "--mi-label") {
      args.miLabel = argv[++i] ?? args.miLabel;
    } else if (flag === "--fps") {
      args.fps = Number(argv[++i] ?? args.fps);
    } else {
      throw new Error(`unknown flag ${flag}`);
    }
  }
  return args;
}

function main(): void {
  const args = parseArgs(process.argv.slice(2));
  const vm = new ConsoleViewModel();
  const client = new ConsoleClient({ host: args.host, port: args.port });
  const dump = args.dump ? fs.createWriteStream(args.dump, { flags: "a" }) : null;
  let paused = false;
  let speed = 1.0;

  client.on("connect", () => vm.onConnect());
  client.on("disconnect", () => vm.onDisconnect());
  client.on("notice", (text) => {
    vm.lastReply = { ok: false, text };
  });
  client.on("message", (msg, line) => {
    vm.apply(msg);
    if (dump && isSessionEvent(msg)) dump.write(line + "\n");
  });
  client.connect();

  const interval = setInterval(() => {
    process.stdout.write(paint(renderFrame(vm)));
  }, Math.max(1000 / args.fps, 20));

  const quit = () => {
    clearInterval(interval);
    client.close();
    if (dump) dump.end();
    process.stdin.setRawMode?.(false);
    process.stdout.write("\n");
    process.exit(0);
  };

  process.stdin.setRawMode?.(true);
  process.stdin.resume();
  process.stdin.setEncoding("utf-8");
  process.stdin.on("data", (key: string) => {
    if (key === "q" || key === "") quit();
    else if (key === "p") client.send({ cmd: "inject_par" });
    else if (key === "m") client.send({ cmd: "inject_mi", label: args.miLabel });
    else if (key === "b") client.send({ cmd: "press_button" });
    else if (key === " ") {
      paused = !paused;
      client.send({ cmd: paused ? "pause" : "resume" });
    } else if (key === "+") {
      speed = Math.min(speed * 2, 64);
      client.send({ cmd: "set_speed", factor: speed });
    } else if (key === "-") {
      speed = Math.max(speed / 2, 0.25);
      client.send({ cmd: "set_speed", factor: speed });
    }
  });
}

main();
