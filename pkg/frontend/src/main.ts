import "./style.css";
import { ApiClient } from "./api";
import { App } from "./app";
import { parseUiState, serializeUiState } from "./state";

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app mount point");

const app = new App({
  root,
  api: new ApiClient(""),
  initialState: parseUiState(location.search),
  onStateChange: (state) => {
    const query = serializeUiState(state);
    history.replaceState(null, "", query ? `?${query}` : location.pathname);
  },
});

void app.init();
