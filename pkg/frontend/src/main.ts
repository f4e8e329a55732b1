import { ChatApp } from "./app";
import "./styles.css";

interface BootParams {
  server: string;
  user: string;
  peer: string;
}

function paramsFromQuery(): BootParams | null {
  const query = new URLSearchParams(location.search);
  const server = query.get("server");
  const user = query.get("user");
  const peer = query.get("peer");
  if (server && user && peer) return { server, user, peer };
  return null;
}

function renderLoginForm(root: HTMLElement): void {
  const form = document.createElement("form");
  form.className = "login-form";
  form.innerHTML = `
    <h1>dyadchat</h1>
    <label>Server <input name="server" value="http://127.0.0.1:8470" /></label>
    <label>Your name <input name="user" placeholder="alice" required /></label>
    <label>Chat with <input name="peer" placeholder="bob" required /></label>
    <button type="submit">Start</button>
  `;
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const query = new URLSearchParams({
      server: String(data.get("server")),
      user: String(data.get("user")),
      peer: String(data.get("peer")),
    });
    location.search = query.toString();
  });
  root.replaceChildren(form);
}

async function boot(root: HTMLElement, params: BootParams): Promise<void> {
  const login = await fetch(`${params.server}/login`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ user_id: params.user }),
  });
  if (!login.ok) throw new Error(`login failed: ${await login.text()}`);
  const { token } = (await login.json()) as { token: string };

  const opened = await fetch(`${params.server}/conversations`, {
    method: "POST",
    headers: { "Content-Type": "application/json", Authorization: `Bearer ${token}` },
    body: JSON.stringify({ peer_id: params.peer }),
  });
  if (!opened.ok) throw new Error(`cannot open conversation: ${await opened.text()}`);
  const { conversation_id } = (await opened.json()) as { conversation_id: string };

  const app = new ChatApp(root, {
    baseUrl: params.server,
    token,
    userId: params.user,
    conversationId: conversation_id,
    onConversationChange: () => location.reload(),
  });
  await app.start();
}

const root = document.getElementById("app");
if (root) {
  const params = paramsFromQuery();
  if (params) {
    boot(root, params).catch((error) => {
      root.textContent = String(error);
    });
  } else {
    renderLoginForm(root);
  }
}
