/** Page bootstrap: hash routing, header controls, and event wiring. */

import { ApiError, Client, SequenceView } from "./api.js";
import { runUploadFlow, showUnit } from "./flow.js";
import {
  errorBanner,
  gradebookTable,
  notFoundPage,
  unitTabs,
} from "./render.js";

export interface Route {
  courseId: string | null;
  unitId: string | null;
  gradebook: boolean;
}

/** "#/course/x/unit/y" or "#/course/x/gradebook"; anything else is home. */
export function parseHash(hash: string): Route {
  const parts = hash.replace(/^#\/?/, "").split("/").map(decodeURIComponent);
  if (parts[0] !== "course" || !parts[1]) {
    return { courseId: null, unitId: null, gradebook: false };
  }
  if (parts[2] === "gradebook") {
    return { courseId: parts[1], unitId: null, gradebook: true };
  }
  return {
    courseId: parts[1],
    unitId: parts[2] === "unit" && parts[3] ? parts[3] : null,
    gradebook: false,
  };
}

function element(id: string): HTMLElement {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing #${id} in the page shell`);
  return found;
}

function currentUser(): string {
  const box = document.getElementById("user-id") as HTMLInputElement | null;
  const name = box?.value.trim();
  return name || "anonymous";
}

function makeClient(): Client {
  const box = document.getElementById("api-token") as HTMLInputElement | null;
  return new Client("", box?.value.trim() || null);
}

let cachedSequence: SequenceView | null = null;

async function loadSequence(client: Client, courseId: string): Promise<SequenceView> {
  if (cachedSequence?.course_id === courseId) return cachedSequence;
  cachedSequence = await client.sequence(courseId);
  return cachedSequence;
}

async function renderRoute(): Promise<void> {
  const client = makeClient();
  const tabs = element("unit-tabs");
  const panel = element("unit-panel");
  const route = parseHash(location.hash);
  try {
    const courses = await client.courses();
    if (courses.length === 0) {
      panel.innerHTML = errorBanner("no courses are loaded on this server", false);
      return;
    }
    const first = courses[0];
    if (first === undefined) return;
    const courseId = route.courseId ?? first.course_id;
    const crumbs = element("course-title");
    let sequence: SequenceView;
    try {
      sequence = await loadSequence(client, courseId);
    } catch (failure) {
      if (failure instanceof ApiError && failure.status === 404) {
        tabs.innerHTML = "";
        panel.innerHTML = notFoundPage(courseId);
        return;
      }
      throw failure;
    }
    crumbs.textContent = sequence.title;
    if (route.gradebook) {
      tabs.innerHTML = unitTabs(sequence, "");
      const entries = await client.gradebook(courseId, currentUser());
      panel.innerHTML =
        `<h2>Gradebook for ${currentUser()}</h2>` + gradebookTable(entries);
      return;
    }
    const firstUnit = sequence.units[0];
    const unitId = route.unitId ?? firstUnit?.unit_id;
    if (unitId === undefined) {
      panel.innerHTML = errorBanner("this course has no units", false);
      return;
    }
    tabs.innerHTML = unitTabs(sequence, unitId);
    await showUnit(panel, client, sequence, unitId);
  } catch {
    panel.innerHTML = errorBanner(
      "service unreachable - check the server and retry", true);
  }
}

function wireEvents(): void {
  window.addEventListener("hashchange", () => {
    void renderRoute();
  });
  document.addEventListener("click", (event) => {
    const target = event.target as HTMLElement | null;
    if (!target) return;
    if (target.matches(".retry")) {
      void renderRoute();
      return;
    }
    if (target.matches(".submission-send")) {
      const panel = target.closest<HTMLElement>(".upload-panel");
      const picker = panel?.querySelector<HTMLInputElement>(".submission-file");
      const file = picker?.files?.[0];
      const assignmentId = panel?.dataset.assignmentId;
      if (!panel || !assignmentId) return;
      if (!file) {
        const status = panel.querySelector<HTMLElement>(".submission-status");
        if (status) status.innerHTML = errorBanner("choose a notebook first", false);
        return;
      }
      void runUploadFlow(panel, makeClient(), assignmentId, currentUser(), file);
    }
  });
  const gradebookLink = document.getElementById("gradebook-link");
  gradebookLink?.addEventListener("click", (event) => {
    event.preventDefault();
    const route = parseHash(location.hash);
    if (cachedSequence || route.courseId) {
      const courseId = route.courseId ?? cachedSequence?.course_id;
      location.hash = `#/course/${encodeURIComponent(courseId ?? "")}/gradebook`;
    }
  });
}

if (typeof document !== "undefined" && document.getElementById("unit-panel")) {
  wireEvents();
  void renderRoute();
}
