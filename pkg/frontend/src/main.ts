import { StudioView } from "./ui.js";

const baseUrl = new URLSearchParams(window.location.search).get("api") ?? "http://127.0.0.1:8080";
new StudioView(baseUrl);
