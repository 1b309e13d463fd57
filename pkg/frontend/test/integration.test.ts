// Integration tests against the real Python service, driven through the UI's
// own client stack (ApiClient + StreamClient + SessionStore) — a headless UI.
//
// Covers the two companion-app acceptance checks:
//   1. UI non-interference: a session scripted through the UI produces the
//      same server log as the headless CLI run of the same script/seed,
//      byte-identical after removing the timing-carrying fields (seq, t, and
//      idle tick records whose count is exactly the timestamp slack), with
//      every user-turn timestamp within one control tick (0.05 s) of the
//      headless run at 1x time-scale.
//   2. Transcript fidelity: UI-displayed text is byte-equal to the log's
//      utterance fields over a 20-turn session.

import { type ChildProcess, execFileSync, spawn } from 'node:child_process';
import { mkdtempSync, readFileSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';
import WebSocket from 'ws';

import { ApiClient } from '../src/api';
import { StreamClient, type WebSocketLike } from '../src/stream';
import { SessionStore } from '../src/store';
import type { LogRecord, StreamMessage } from '../src/types';

const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;
const WS_BASE = `ws://127.0.0.1:${PORT}`;
const DT = 0.05;

const wsFactory = (url: string) => new WebSocket(url) as unknown as WebSocketLike;

let service: ChildProcess;

async function waitForService(): Promise<void> {
  const deadline = Date.now() + 20_000;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/worlds`);
      if (response.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error('service did not come up');
}

beforeAll(async () => {
  service = spawn('python3', ['-m', 'stancelab.cli', 'serve',
                              '--port', String(PORT), '--time-scale', '1.0'],
                  { stdio: 'ignore' });
  await waitForService();
}, 30_000);

afterAll(() => {
  service.kill();
});

function canonical(value: unknown): string {
  const normalize = (node: unknown): unknown => {
    if (Array.isArray(node)) return node.map(normalize);
    if (node && typeof node === 'object') {
      const out: Record<string, unknown> = {};
      for (const key of Object.keys(node as object).sort()) {
        out[key] = normalize((node as Record<string, unknown>)[key]);
      }
      return out;
    }
    return node;
  };
  return JSON.stringify(normalize(value));
}

/** Timing-free projection of a log: drop idle ticks, strip seq and t. */
function timeless(records: LogRecord[]): string[] {
  return records
    .filter((record) => record.event.kind !== 'tick')
    .map((record) => canonical({
      event: { kind: record.event.kind, payload: record.event.payload },
      beliefs: record.beliefs,
      desires: record.desires,
      intention: record.intention,
      action: record.action,
    }));
}

interface Driver {
  sessionId: string;
  store: SessionStore;
  stream: StreamClient;
  api: ApiClient;
  waitForSimTime: (t: number) => Promise<void>;
  waitFor: (predicate: () => boolean, timeoutMs?: number) => Promise<void>;
  stop: () => void;
}

async function startDriver(world: string, seed: number): Promise<Driver> {
  const api = new ApiClient(BASE);
  const session = await api.createSession({
    world, engine: 'rules', seed, default_frame: 'agentive', manual: false,
  });
  const store = new SessionStore(session.world, session.frame);
  let simTime = 0;
  const stream = new StreamClient(WS_BASE, session.id, (message: StreamMessage) => {
    store.handle(message);
    if (message.type === 'record') simTime = message.record.event.t;
  }, () => {}, { wsFactory, reconnectDelayMs: 200 });
  stream.connect(0);

  const waitFor = async (predicate: () => boolean, timeoutMs = 60_000) => {
    const deadline = Date.now() + timeoutMs;
    while (!predicate()) {
      if (Date.now() > deadline) throw new Error('timed out waiting');
      await new Promise((resolve) => setTimeout(resolve, 5));
    }
  };
  return {
    sessionId: session.id,
    store,
    stream,
    api,
    waitForSimTime: (t) => waitFor(() => simTime >= t - 1e-9, 120_000),
    waitFor,
    stop: () => stream.stop(),
  };
}

describe('UI non-interference', () => {
  it('scripted UI session matches the headless log modulo timestamps', async () => {
    const dir = mkdtempSync(join(tmpdir(), 'stancelab-ui-'));
    const scriptPath = join(dir, 'quick.script');
    // first turn delayed so the live driver can connect before t=2.0
    writeFileSync(scriptPath, [
      'wait 2',
      'say Go to the dining table.',
      'await idle',
      'say What is your position?',
      'wait 1',
      '',
    ].join('\n'));

    execFileSync('python3', ['-m', 'stancelab.cli', 'run',
                             '--script', scriptPath, '--world', 'small_house',
                             '--frame', 'agentive', '--seed', '7', '--out', dir,
                             '--scenario-id', 'quick']);
    const headless: LogRecord[] = readFileSync(join(dir, 'quick.agentive.jsonl'), 'utf8')
      .trim().split('\n').map((line) => JSON.parse(line));
    const stimuli = headless
      .filter((record) => record.event.kind === 'user_utterance')
      .map((record) => ({ t: record.event.t, text: String(record.event.payload.text) }));
    const endT = headless[headless.length - 1].event.t;

    const driver = await startDriver('small_house', 7);
    try {
      for (const stimulus of stimuli) {
        // fire one tick early so the turn lands within a tick of the target
        await driver.waitForSimTime(stimulus.t - DT);
        await driver.api.postMessage(driver.sessionId, stimulus.text);
      }
      await driver.waitForSimTime(endT);
      await driver.api.closeSession(driver.sessionId);
      const { records } = await driver.api.getLog(driver.sessionId);

      // every user turn landed within one tick of the headless schedule
      const uiStimuli = records.filter((r) => r.event.kind === 'user_utterance');
      expect(uiStimuli).toHaveLength(stimuli.length);
      for (let i = 0; i < stimuli.length; i++) {
        expect(Math.abs(uiStimuli[i].event.t - stimuli[i].t))
          .toBeLessThanOrEqual(DT + 1e-9);
      }

      // same records byte-for-byte once timing carriers are stripped
      const uiTimeless = timeless(records);
      const headlessTimeless = timeless(headless);
      expect(uiTimeless.length).toBe(headlessTimeless.length);
      for (let i = 0; i < headlessTimeless.length; i++) {
        expect(uiTimeless[i]).toBe(headlessTimeless[i]);
      }
    } finally {
      driver.stop();
    }
  }, 120_000);
});

describe('transcript fidelity', () => {
  it('UI text is byte-equal to the log utterance fields over 20 turns', async () => {
    const driver = await startDriver('bookstore', 11);
    const questions = ['What is your position?', 'What is your state?'];
    try {
      for (let turn = 0; turn < 20; turn++) {
        await driver.api.postMessage(driver.sessionId, questions[turn % 2]);
      }
      await driver.waitFor(() =>
        driver.store.chat.filter((entry) => entry.role === 'robot').length >= 20);

      const { records } = await driver.api.getLog(driver.sessionId);
      const logged = records
        .filter((record) => record.event.kind === 'llm_response')
        .map((record) => String(record.event.payload.text));
      expect(logged).toHaveLength(20);
      expect(driver.store.robotTranscript()).toEqual(logged);

      const userLogged = records
        .filter((record) => record.event.kind === 'user_utterance')
        .map((record) => String(record.event.payload.text));
      expect(driver.store.chat.filter((entry) => entry.role === 'user')
        .map((entry) => entry.text)).toEqual(userLogged);
      await driver.api.closeSession(driver.sessionId);
    } finally {
      driver.stop();
    }
  }, 60_000);
});
