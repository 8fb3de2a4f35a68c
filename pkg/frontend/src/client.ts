/** WebSocket glue between the session service and the ViewModel.
 *
 * The socket callbacks all run on the page's event loop, so frames fold
 * into the model strictly in arrival order. At most one decision is in
 * flight: submitDecision refuses while the model is not awaiting one, so
 * a double click cannot answer the same step twice.
 */

import { HumanAction, parseServerFrame } from "./protocol.js";
import {
  applyFrame,
  connectRequested,
  connectionFailed,
  decisionSent,
  initialViewModel,
  protocolError,
  ViewModel,
} from "./viewmodel.js";

export class ConsoleClient {
  private vm: ViewModel = initialViewModel();
  private ws: WebSocket | null = null;

  constructor(private readonly onChange: (vm: ViewModel) => void) {}

  get viewModel(): ViewModel {
    return this.vm;
  }

  connect(endpoint: string, seed: number): void {
    this.teardown();
    this.set(connectRequested(endpoint, seed));
    let ws: WebSocket;
    try {
      ws = new WebSocket(endpoint);
    } catch (err) {
      this.set(connectionFailed(this.vm, String(err)));
      return;
    }
    this.ws = ws;
    ws.onopen = () => ws.send(JSON.stringify({ type: "open", seed }));
    ws.onmessage = (ev) => this.receive(String(ev.data));
    ws.onclose = () => {
      if (this.ws !== ws) return; // superseded by a later connect
      this.ws = null;
      if (this.vm.phase === "connecting" || this.vm.phase === "live")
        this.set(connectionFailed(this.vm, "connection lost"));
    };
  }

  /** Reconnect with the endpoint and seed of the last attempt. */
  retry(): void {
    if (this.vm.endpoint !== null && this.vm.seed !== null)
      this.connect(this.vm.endpoint, this.vm.seed);
  }

  submitDecision(action: HumanAction): void {
    if (!this.vm.decisionPending) return; // out-of-turn click
    if (this.ws === null || this.vm.session === null) return;
    this.ws.send(
      JSON.stringify({ type: "h_action", session: this.vm.session, action }),
    );
    this.set(decisionSent(this.vm));
  }

  close(): void {
    this.teardown();
    this.set(initialViewModel());
  }

  private receive(raw: string): void {
    const frame = parseServerFrame(raw);
    if (frame === null) {
      this.set(protocolError(this.vm, "unrecognized message from server"));
      return;
    }
    this.set(applyFrame(this.vm, frame));
  }

  private set(vm: ViewModel): void {
    this.vm = vm;
    this.onChange(vm);
  }

  private teardown(): void {
    const ws = this.ws;
    if (ws === null) return;
    this.ws = null;
    ws.onopen = null;
    ws.onmessage = null;
    ws.onclose = null;
    if (this.vm.session !== null && ws.readyState === WebSocket.OPEN) {
      // best effort; the server keeps no per-socket state we depend on
      ws.send(JSON.stringify({ type: "close", session: this.vm.session }));
    }
    ws.close();
  }
}
