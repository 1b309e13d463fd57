import { ApiClient, ApiError } from './api';
import { drawFrontView } from './frontview';
import { drawPlanView } from './planview';
import { StreamClient, type ConnectionStatus } from './stream';
import { SessionStore, type Viewpoint } from './store';
import type { FrameName, SessionInfo, StateDoc } from './types';

const SERVICE_URL = (import.meta as any).env?.VITE_SERVICE_URL ?? 'http://127.0.0.1:8080';
const WS_URL = SERVICE_URL.replace(/^http/, 'ws');
const STALE_AFTER_MS = 1500;
const FRAMES: FrameName[] = ['agentive', 'teleological', 'mechanistic'];

const api = new ApiClient(SERVICE_URL);

interface App {
  session: SessionInfo;
  store: SessionStore;
  stream: StreamClient;
  status: ConnectionStatus;
}

let app: App | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setBanner(text: string | null): void {
  const banner = el<HTMLDivElement>('banner');
  banner.textContent = text ?? '';
  banner.style.display = text ? 'block' : 'none';
  el<HTMLInputElement>('chat-input').disabled = text !== null;
  el<HTMLButtonElement>('chat-send').disabled = text !== null;
}

function renderChat(store: SessionStore): void {
  const list = el<HTMLDivElement>('chat-log');
  list.innerHTML = '';
  for (const entry of store.chat) {
    const bubble = document.createElement('div');
    bubble.className = `bubble ${entry.role}`;
    const text = document.createElement('div');
    text.className = 'bubble-text';
    text.textContent = entry.text; // exact server bytes
    bubble.appendChild(text);
    if (entry.role === 'robot') {
      const badge = document.createElement('span');
      badge.className = `badge ${entry.frame}`;
      badge.textContent = `${entry.frame} · ${entry.provenance}`;
      bubble.appendChild(badge);
    }
    list.appendChild(bubble);
  }
  list.scrollTop = list.scrollHeight;
}

function renderInspector(state: StateDoc): void {
  el<HTMLPreElement>('inspector-beliefs').textContent =
    state.beliefs.map((b) =>
      `${b.category}: ${b.content.predicate}(${JSON.stringify(b.content.args)})` +
      ` ρ=${b.confidence} σ=${b.source}`).join('\n') || '(none)';
  el<HTMLPreElement>('inspector-desires').textContent =
    state.desires.map((d) =>
      `${d.id}: ${d.goal.predicate}(${JSON.stringify(d.goal.args)}) p=${d.priority}`)
      .join('\n') || '(none)';
  el<HTMLPreElement>('inspector-intention').textContent = state.intention
    ? `${state.intention.action} ${JSON.stringify(state.intention.params)} ` +
      `[${state.intention.status}]`
    : '(none)';
}

function frameButtons(active: FrameName): void {
  for (const frame of FRAMES) {
    el<HTMLButtonElement>(`frame-${frame}`).classList.toggle('active', frame === active);
  }
}

function startRenderLoop(): void {
  const planCanvas = el<HTMLCanvasElement>('plan-view');
  const frontCanvas = el<HTMLCanvasElement>('front-view');
  const planCtx = planCanvas.getContext('2d')!;
  const frontCtx = frontCanvas.getContext('2d')!;

  const draw = () => {
    if (app) {
      const { store } = app;
      const staleness = store.stalenessMs();
      const stale = app.status !== 'open'
        || (staleness !== null && staleness > STALE_AFTER_MS);
      const viewpoint = store.viewpoint;
      planCanvas.parentElement!.style.display =
        viewpoint === 'front' ? 'none' : 'block';
      frontCanvas.parentElement!.style.display =
        viewpoint === 'plan' ? 'none' : 'block';
      if (viewpoint !== 'front') {
        drawPlanView(planCtx, planCanvas.width, planCanvas.height,
                     { world: store.world, pose: store.pose, path: store.path, stale });
      }
      if (viewpoint !== 'plan') {
        drawFrontView(frontCtx, frontCanvas.width, frontCanvas.height,
                      { world: store.world, pose: store.pose, stale });
      }
      el<HTMLSpanElement>('sim-time').textContent =
        `t=${store.simTime.toFixed(2)}s seq=${store.lastSeq}`;
    }
    requestAnimationFrame(draw); // 60 fps target, decoupled from stream rate
  };
  requestAnimationFrame(draw);
}

async function createSession(): Promise<void> {
  const world = el<HTMLSelectElement>('world-select').value;
  const engine = el<HTMLSelectElement>('engine-select').value as 'rules' | 'llm';
  const seed = Number(el<HTMLInputElement>('seed-input').value) || 0;
  const frame = el<HTMLSelectElement>('frame-select').value as FrameName;

  app?.stream.stop();
  const session = await api.createSession({ world, engine, seed, default_frame: frame });
  const store = new SessionStore(session.world, session.frame);
  const stream = new StreamClient(WS_URL, session.id, (message) => {
    store.handle(message);
    if (message.type === 'record'
        && ['user_utterance', 'llm_response', 'frame_switch'].includes(
          message.record.event.kind)) {
      renderChat(store);
      frameButtons(store.frame);
    }
    if (message.type === 'closed') setBanner('session closed');
  }, (status) => {
    if (app) app.status = status;
    setBanner(status === 'open' ? null
      : status === 'ended' ? 'session closed' : 'disconnected — reconnecting…');
  });
  app = { session, store, stream, status: 'connecting' };
  stream.connect(0);
  renderChat(store);
  frameButtons(session.frame);
  el<HTMLSpanElement>('session-label').textContent =
    `${session.id} · ${world} · ${engine} · seed ${seed}`;
}

async function sendMessage(): Promise<void> {
  if (!app) return;
  const input = el<HTMLInputElement>('chat-input');
  const text = input.value.trim();
  if (!text) return;
  input.value = '';
  try {
    await api.postMessage(app.session.id, text);
  } catch (error) {
    if (error instanceof ApiError) setBanner(`error: ${error.message}`);
  }
}

function wireUi(): void {
  el<HTMLButtonElement>('create-session').addEventListener('click', () => {
    createSession().catch((error) => setBanner(`error: ${error.message}`));
  });
  el<HTMLButtonElement>('chat-send').addEventListener('click', () => void sendMessage());
  el<HTMLInputElement>('chat-input').addEventListener('keydown', (event) => {
    if (event.key === 'Enter') void sendMessage();
  });

  for (const frame of FRAMES) {
    el<HTMLButtonElement>(`frame-${frame}`).addEventListener('click', async () => {
      if (!app) return;
      await api.switchFrame(app.session.id, frame);
    });
  }

  el<HTMLSelectElement>('viewpoint-select').addEventListener('change', (event) => {
    if (app) app.store.viewpoint = (event.target as HTMLSelectElement).value as Viewpoint;
  });

  const modeToggle = el<HTMLInputElement>('experimenter-mode');
  const applyMode = () => {
    // participant mode hides the frame switcher and the belief inspector
    document.body.classList.toggle('experimenter', modeToggle.checked);
  };
  modeToggle.addEventListener('change', applyMode);
  applyMode();

  setInterval(async () => {
    if (!app || !document.body.classList.contains('experimenter')) return;
    try {
      renderInspector(await api.getState(app.session.id));
    } catch {
      /* closed session or transient error; banner handles it */
    }
  }, 1000);

  api.listWorlds().then(({ worlds }) => {
    const select = el<HTMLSelectElement>('world-select');
    select.innerHTML = '';
    for (const name of worlds) {
      const option = document.createElement('option');
      option.value = name;
      option.textContent = name;
      select.appendChild(option);
    }
  }).catch(() => setBanner('service unreachable'));

  startRenderLoop();
}

wireUi();
