/**
 * Embeddable chat widget for the sitegrounder service API.
 *
 * One script tag + one mount() call injects a floating launcher button;
 * clicking it toggles a chat panel. A session is created lazily on the
 * first message. Answers render with collapsible source links. All
 * message text goes through textContent, never innerHTML.
 */

export interface WidgetConfig {
  apiBaseUrl: string;
  widgetTitle?: string;
  launcherPosition?: "bottom-right" | "bottom-left";
  showSources?: boolean;
}

export interface SourceLink {
  source_url: string;
  score: number;
}

export interface UiMessage {
  role: "user" | "assistant" | "system";
  text: string;
  sources?: SourceLink[];
  pending: boolean;
}

interface TurnResponse {
  answer: string;
  standalone_question: string;
  sources: { chunk_id: string; source_url: string; score: number }[];
}

const Z_INDEX = "2147482000";

function assertAbsoluteUrl(url: string): string {
  const parsed = new URL(url); // throws on relative/garbage input
  return parsed.origin + parsed.pathname.replace(/\/$/, "");
}

export class ChatWidget {
  readonly config: Required<WidgetConfig>;
  readonly messages: UiMessage[] = [];

  private root: HTMLDivElement;
  private launcher: HTMLButtonElement;
  private panel: HTMLDivElement;
  private transcript: HTMLDivElement;
  private input: HTMLInputElement;
  private sendButton: HTMLButtonElement;

  private sessionId: string | null = null;
  private inFlight = false;

  constructor(config: WidgetConfig) {
    this.config = {
      apiBaseUrl: assertAbsoluteUrl(config.apiBaseUrl),
      widgetTitle: config.widgetTitle ?? "Ask us",
      launcherPosition: config.launcherPosition ?? "bottom-right",
      showSources: config.showSources ?? true,
    };

    this.root = document.createElement("div");
    this.root.className = "sg-widget";

    this.launcher = this.buildLauncher();
    this.panel = this.buildPanel();
    this.transcript = this.panel.querySelector(".sg-transcript") as HTMLDivElement;
    this.input = this.panel.querySelector(".sg-input") as HTMLInputElement;
    this.sendButton = this.panel.querySelector(".sg-send") as HTMLButtonElement;

    this.root.appendChild(this.launcher);
    this.root.appendChild(this.panel);
    document.body.appendChild(this.root);
  }

  get isOpen(): boolean {
    return this.panel.style.display !== "none";
  }

  get isPending(): boolean {
    return this.inFlight;
  }

  toggle(): void {
    // Hide, don't destroy: transcript and session survive close/reopen.
    this.panel.style.display = this.isOpen ? "none" : "flex";
  }

  reset(): void {
    this.sessionId = null;
    this.messages.length = 0;
    this.transcript.replaceChildren();
  }

  async send(text: string): Promise<void> {
    const trimmed = text.trim();
    if (!trimmed || this.inFlight) {
      return;
    }
    this.setPending(true);
    const userMessage: UiMessage = { role: "user", text: trimmed, pending: true };
    const userBubble = this.appendMessage(userMessage);

    try {
      const turn = await this.postMessage(trimmed);
      userMessage.pending = false;
      userBubble.classList.remove("sg-pending");
      this.appendMessage({
        role: "assistant",
        text: turn.answer,
        sources: turn.sources?.map((s) => ({ source_url: s.source_url, score: s.score })),
        pending: false,
      });
    } catch (err) {
      // Drop the failed bubble but put the typed text back in the box.
      this.messages.splice(this.messages.indexOf(userMessage), 1);
      userBubble.remove();
      this.input.value = trimmed;
      this.appendSystemRetry(
        err instanceof Error ? err.message : "Could not reach the chat service.",
        trimmed,
      );
    } finally {
      this.setPending(false);
    }
  }

  destroy(): void {
    this.root.remove();
  }

  private async postMessage(text: string, retried = false): Promise<TurnResponse> {
    const sessionId = await this.ensureSession();
    const resp = await fetch(`${this.config.apiBaseUrl}/api/sessions/${sessionId}/messages`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
    if (resp.status === 410 && !retried) {
      // Session expired server-side: start a fresh one and resend once.
      this.sessionId = null;
      return this.postMessage(text, true);
    }
    if (!resp.ok) {
      throw new Error(`chat service error (HTTP ${resp.status})`);
    }
    return (await resp.json()) as TurnResponse;
  }

  private async ensureSession(): Promise<string> {
    if (this.sessionId) {
      return this.sessionId;
    }
    const resp = await fetch(`${this.config.apiBaseUrl}/api/sessions`, { method: "POST" });
    if (!resp.ok) {
      throw new Error(`could not create a session (HTTP ${resp.status})`);
    }
    const body = (await resp.json()) as { session_id: string };
    this.sessionId = body.session_id;
    return this.sessionId;
  }

  private setPending(pending: boolean): void {
    this.inFlight = pending;
    this.input.disabled = pending;
    this.sendButton.disabled = pending;
    if (!pending) {
      this.input.focus();
    }
  }

  private appendMessage(message: UiMessage): HTMLDivElement {
    this.messages.push(message);
    const bubble = document.createElement("div");
    bubble.className = `sg-bubble sg-${message.role}` + (message.pending ? " sg-pending" : "");
    Object.assign(bubble.style, {
      maxWidth: "85%",
      margin: "4px 8px",
      padding: "8px 10px",
      borderRadius: "10px",
      fontSize: "14px",
      whiteSpace: "pre-wrap",
      alignSelf: message.role === "user" ? "flex-end" : "flex-start",
      background: message.role === "user" ? "#1f6feb" : message.role === "assistant" ? "#f0f2f5" : "#fff3cd",
      color: message.role === "user" ? "#ffffff" : "#1c1e21",
    });

    const textNode = document.createElement("div");
    textNode.className = "sg-text";
    textNode.textContent = message.text; // text node only: markup stays inert
    bubble.appendChild(textNode);

    if (message.sources && message.sources.length > 0 && this.config.showSources) {
      bubble.appendChild(this.buildSourceList(message.sources));
    }

    this.transcript.appendChild(bubble);
    this.transcript.scrollTop = this.transcript.scrollHeight;
    return bubble;
  }

  private buildSourceList(sources: SourceLink[]): HTMLDetailsElement {
    const details = document.createElement("details");
    details.className = "sg-sources";
    const summary = document.createElement("summary");
    summary.textContent = `Sources (${sources.length})`;
    details.appendChild(summary);
    for (const source of sources) {
      const link = document.createElement("a");
      link.href = source.source_url;
      link.textContent = source.source_url;
      link.target = "_blank";
      link.rel = "noopener noreferrer";
      Object.assign(link.style, { display: "block", fontSize: "12px", margin: "2px 0" });
      details.appendChild(link);
    }
    return details;
  }

  private appendSystemRetry(message: string, failedText: string): void {
    const bubble = this.appendMessage({
      role: "system",
      text: `${message} Your message was not sent.`,
      pending: false,
    });
    const retry = document.createElement("button");
    retry.type = "button";
    retry.className = "sg-retry";
    retry.textContent = "Retry";
    Object.assign(retry.style, {
      marginTop: "6px",
      padding: "4px 10px",
      border: "1px solid #b58900",
      borderRadius: "6px",
      background: "transparent",
      cursor: "pointer",
    });
    retry.addEventListener("click", () => {
      bubble.remove();
      const idx = this.messages.findIndex((m) => m.role === "system");
      if (idx >= 0) {
        this.messages.splice(idx, 1);
      }
      void this.send(failedText);
    });
    bubble.appendChild(retry);
  }

  private buildLauncher(): HTMLButtonElement {
    const button = document.createElement("button");
    button.type = "button";
    button.className = "sg-launcher";
    button.setAttribute("aria-label", "Open chat");
    button.textContent = "💬";
    const side = this.config.launcherPosition === "bottom-left" ? { left: "20px" } : { right: "20px" };
    Object.assign(button.style, {
      position: "fixed",
      bottom: "20px",
      ...side,
      width: "56px",
      height: "56px",
      borderRadius: "28px",
      border: "0",
      background: "#1f6feb",
      color: "#ffffff",
      fontSize: "24px",
      cursor: "pointer",
      boxShadow: "0 8px 20px rgba(0,0,0,.35)",
      zIndex: Z_INDEX,
    });
    button.addEventListener("click", () => this.toggle());
    return button;
  }

  private buildPanel(): HTMLDivElement {
    const panel = document.createElement("div");
    panel.className = "sg-panel";
    const side = this.config.launcherPosition === "bottom-left" ? { left: "20px" } : { right: "20px" };
    Object.assign(panel.style, {
      position: "fixed",
      bottom: "88px",
      ...side,
      width: "340px",
      height: "440px",
      display: "none",
      flexDirection: "column",
      background: "#ffffff",
      borderRadius: "12px",
      boxShadow: "0 12px 32px rgba(0,0,0,.3)",
      overflow: "hidden",
      zIndex: Z_INDEX,
      fontFamily: "system-ui, sans-serif",
    });

    const header = document.createElement("div");
    header.className = "sg-header";
    Object.assign(header.style, {
      padding: "10px 12px",
      background: "#1f6feb",
      color: "#ffffff",
      display: "flex",
      justifyContent: "space-between",
      alignItems: "center",
    });
    const title = document.createElement("span");
    title.textContent = this.config.widgetTitle;
    header.appendChild(title);
    const resetButton = document.createElement("button");
    resetButton.type = "button";
    resetButton.className = "sg-reset";
    resetButton.textContent = "Reset";
    resetButton.setAttribute("aria-label", "Reset conversation");
    Object.assign(resetButton.style, {
      border: "0",
      background: "transparent",
      color: "#ffffff",
      cursor: "pointer",
      fontSize: "12px",
    });
    resetButton.addEventListener("click", () => this.reset());
    header.appendChild(resetButton);

    const transcript = document.createElement("div");
    transcript.className = "sg-transcript";
    Object.assign(transcript.style, {
      flex: "1",
      display: "flex",
      flexDirection: "column",
      overflowY: "auto",
      padding: "8px 0",
    });

    const composer = document.createElement("form");
    composer.className = "sg-composer";
    Object.assign(composer.style, {
      display: "flex",
      gap: "6px",
      padding: "8px",
      borderTop: "1px solid #e4e6eb",
    });
    const input = document.createElement("input");
    input.className = "sg-input";
    input.type = "text";
    input.placeholder = "Type a question…";
    Object.assign(input.style, {
      flex: "1",
      padding: "8px 10px",
      border: "1px solid #ccd0d5",
      borderRadius: "8px",
      fontSize: "14px",
    });
    const sendButton = document.createElement("button");
    sendButton.className = "sg-send";
    sendButton.type = "submit";
    sendButton.textContent = "Send";
    Object.assign(sendButton.style, {
      padding: "8px 14px",
      border: "0",
      borderRadius: "8px",
      background: "#1f6feb",
      color: "#ffffff",
      cursor: "pointer",
    });
    composer.appendChild(input);
    composer.appendChild(sendButton);
    composer.addEventListener("submit", (event) => {
      event.preventDefault();
      const value = input.value;
      input.value = "";
      void this.send(value);
    });

    panel.appendChild(header);
    panel.appendChild(transcript);
    panel.appendChild(composer);
    return panel;
  }
}

export function mount(config: WidgetConfig): ChatWidget {
  return new ChatWidget(config);
}

export default { mount };
