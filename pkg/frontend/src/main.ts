import { boot } from "./app.js";

const root = document.getElementById("app");
if (root) boot(root);
