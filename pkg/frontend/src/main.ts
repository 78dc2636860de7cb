import { GatewayClient } from "./api.js";
import { ConsoleApp } from "./app.js";

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app mount point");

const params = new URLSearchParams(window.location.search);
const client = new GatewayClient("", params.get("token"));
const app = new ConsoleApp(root, client, params.get("moderator") ?? "console");
void app.start();
