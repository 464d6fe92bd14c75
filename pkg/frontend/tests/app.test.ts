/**
 * DOM-level tests for the triage app against an in-memory fake of the
 * service. The fixture mirrors a committed window with 8 high-tier and
 * 141 low-tier anomalies.
 */

import { afterEach, describe, expect, it } from "vitest";

import { TriageApi } from "../src/api.js";
import { TriageApp } from "../src/app.js";
import { FakeService, fixtureRecords, flush, makeRecord } from "./helpers.js";

function mount(service: FakeService): { app: TriageApp; root: HTMLElement } {
  const root = document.createElement("div");
  document.body.appendChild(root);
  const app = new TriageApp(root, new TriageApi("", service.fetchImpl));
  return { app, root };
}

async function mountLoaded(service: FakeService): Promise<{ app: TriageApp; root: HTMLElement }> {
  const mounted = mount(service);
  await mounted.app.start();
  return mounted;
}

function q<T extends HTMLElement>(root: HTMLElement, selector: string): T {
  const el = root.querySelector<T>(selector);
  if (!el) throw new Error(`no element matching ${selector}`);
  return el;
}

function click(root: HTMLElement, selector: string): void {
  q<HTMLElement>(root, selector).click();
}

function rowIds(root: HTMLElement): string[] {
  return [...root.querySelectorAll<HTMLElement>(".queue-row")].map((el) => el.dataset["id"] ?? "");
}

function verdictBadge(root: HTMLElement, id: string): string {
  return q<HTMLElement>(root, `.queue-row[data-id="${id}"] [data-role="verdict"]`)
    .textContent?.trim() ?? "";
}

function setSlider(root: HTMLElement, value: number): void {
  const slider = q<HTMLInputElement>(root, "[data-role=risk-slider]");
  slider.value = String(value);
  slider.dispatchEvent(new Event("input", { bubbles: true }));
}

function fixtureService(): FakeService {
  return new FakeService(fixtureRecords(8, 141));
}

afterEach(() => {
  document.body.innerHTML = "";
});

describe("queue listing", () => {
  it("lists only the 8 high-tier anomalies by default", async () => {
    const service = fixtureService();
    const { root } = await mountLoaded(service);
    expect(rowIds(root).length).toBe(8);
    expect(root.querySelectorAll('.queue-row[data-tier="low"]').length).toBe(0);
    expect(q(root, "[data-role=queue-summary]").textContent)
      .toBe("8 high-tier anomalies (low tier hidden)");
    const listings = service.requests((r) => r.path === "/api/v1/anomalies");
    expect(listings.length).toBe(1);
    expect(listings[0].query.get("tier")).toBe("high");
  });

  it("reveals the 141 low-tier anomalies behind the toggle", async () => {
    const service = fixtureService();
    const { root } = await mountLoaded(service);
    const toggle = q<HTMLInputElement>(root, "[data-role=toggle-low]");
    toggle.checked = true;
    toggle.dispatchEvent(new Event("change", { bubbles: true }));
    await flush();
    expect(rowIds(root).length).toBe(149);
    expect(root.querySelectorAll('.queue-row[data-tier="low"]').length).toBe(141);
    expect(q(root, "[data-role=queue-summary]").textContent)
      .toBe("149 anomalies: 8 high, 141 low");
    const last = service.requests((r) => r.path === "/api/v1/anomalies").pop();
    expect(last?.query.get("tier")).toBe("all");
  });

  it("orders rows by confidence descending regardless of listing order", async () => {
    const service = new FakeService([
      makeRecord(0, { confidence: 0.7 }),
      makeRecord(1, { confidence: 0.99 }),
      makeRecord(2, { confidence: 0.95 }),
    ]);
    const { root } = await mountLoaded(service);
    expect(rowIds(root)).toEqual(["rec-0001", "rec-0002", "rec-0000"]);
  });

  it("shows an explicit empty state when nothing matched", async () => {
    const { root } = await mountLoaded(new FakeService());
    expect(q(root, ".empty-state").textContent).toBe("No anomalies in range");
    expect(q(root, "[data-role=queue-summary]").textContent)
      .toBe("0 high-tier anomalies (low tier hidden)");
  });

  it("passes the from/to range through to the listing request", async () => {
    const service = fixtureService();
    const { root } = await mountLoaded(service);
    q<HTMLInputElement>(root, "[data-role=from]").value = "2026-01-12T00:00:00Z";
    q<HTMLInputElement>(root, "[data-role=to]").value = "2026-01-12T00:05:00Z";
    click(root, "[data-action=apply-range]");
    await flush();
    const last = service.requests((r) => r.path === "/api/v1/anomalies").pop();
    expect(last?.query.get("from")).toBe("2026-01-12T00:00:00Z");
    expect(last?.query.get("to")).toBe("2026-01-12T00:05:00Z");
    expect(rowIds(root).length).toBe(5);
  });
});

describe("connectivity", () => {
  it("shows a banner and a retry affordance instead of an empty queue", async () => {
    const service = fixtureService();
    service.offlineWhen = () => true;
    const { root } = await mountLoaded(service);
    const banner = q<HTMLElement>(root, "[data-role=banner]");
    expect(banner.hidden).toBe(false);
    expect(q(root, "[data-role=banner-text]").textContent).toContain("service unreachable");
    expect(root.querySelector(".empty-state")).toBeNull();
    expect(q(root, "[data-role=queue-list] .load-error").textContent)
      .toContain("could not be loaded");
    expect(root.querySelector("[data-role=queue-list] [data-action=retry-load]")).not.toBeNull();
  });

  it("recovers through the retry button once the service is back", async () => {
    const service = fixtureService();
    service.offlineWhen = () => true;
    const { root } = await mountLoaded(service);
    service.offlineWhen = null;
    click(root, "[data-role=banner] [data-action=retry-load]");
    await flush();
    expect(q<HTMLElement>(root, "[data-role=banner]").hidden).toBe(true);
    expect(rowIds(root).length).toBe(8);
    expect(root.querySelector("[data-role=risk-slider]")).not.toBeNull();
  });
});

describe("verdicts", () => {
  it("marks the row optimistically and reconciles with the server response", async () => {
    const service = fixtureService();
    const { root } = await mountLoaded(service);
    const release = service.pause((req) => req.method === "POST");
    click(root, '[data-action="verdict"][data-id="rec-0000"][data-verdict="confirmed"]');

    expect(verdictBadge(root, "rec-0000")).toBe("Confirmed");
    const buttons = root.querySelectorAll('[data-action="verdict"][data-id="rec-0000"]');
    expect([...buttons].every((b) => b.hasAttribute("disabled"))).toBe(true);

    release();
    await flush();
    expect(verdictBadge(root, "rec-0000")).toBe("Confirmed");
    expect(service.records.get("rec-0000")?.verdict).toBe("confirmed");
    expect(service.records.get("rec-0000")?.verdict_time).not.toBeNull();
    const after = root.querySelectorAll('[data-action="verdict"][data-id="rec-0000"]');
    expect([...after].some((b) => b.hasAttribute("disabled"))).toBe(false);
  });

  it("reverts to the committed verdict and surfaces it on a conflict", async () => {
    const service = fixtureService();
    const { root } = await mountLoaded(service);
    // Another operator confirms the record after this page loaded it.
    const rec = service.records.get("rec-0000")!;
    service.records.set("rec-0000", {
      ...rec,
      verdict: "confirmed",
      verdict_time: "2026-01-12T08:00:00Z",
    });

    click(root, '[data-action="verdict"][data-id="rec-0000"][data-verdict="false_flag"]');
    await flush();

    expect(verdictBadge(root, "rec-0000")).toBe("Confirmed");
    const notice = q<HTMLElement>(root, '.queue-row[data-id="rec-0000"] .row-notice');
    expect(notice.className).toContain("phase-conflict");
    expect(notice.textContent).toContain("already marked confirmed");
    expect(service.records.get("rec-0000")?.verdict).toBe("confirmed");
    expect(service.mutations().length).toBe(1);
  });

  it("parks an offline submission behind a retry affordance", async () => {
    const service = fixtureService();
    const { root } = await mountLoaded(service);
    service.offlineWhen = (req) => req.method === "POST";

    click(root, '[data-action="verdict"][data-id="rec-0000"][data-verdict="confirmed"]');
    await flush();

    expect(verdictBadge(root, "rec-0000")).toBe("Unreviewed");
    const notice = q<HTMLElement>(root, '.queue-row[data-id="rec-0000"] .row-notice');
    expect(notice.className).toContain("phase-failed");
    expect(notice.textContent).toContain('"Confirmed" was not submitted');

    service.offlineWhen = null;
    click(root, '[data-action="retry-verdict"][data-id="rec-0000"]');
    await flush();

    expect(verdictBadge(root, "rec-0000")).toBe("Confirmed");
    expect(service.records.get("rec-0000")?.verdict).toBe("confirmed");
    const posts = service.requests((r) => r.method === "POST");
    expect(posts.length).toBe(2);
  });

  it("reproduces a submitted verdict on a fresh page load", async () => {
    const service = fixtureService();
    const first = await mountLoaded(service);
    click(first.root, '[data-action="verdict"][data-id="rec-0003"][data-verdict="false_flag"]');
    await flush();
    expect(verdictBadge(first.root, "rec-0003")).toBe("False flag");
    const order = rowIds(first.root);

    const second = await mountLoaded(service);
    expect(verdictBadge(second.root, "rec-0003")).toBe("False flag");
    expect(rowIds(second.root)).toEqual(order);
  });
});

describe("context chart", () => {
  it("opens the context pane with chart, summary, and record facts", async () => {
    const service = fixtureService();
    const { root } = await mountLoaded(service);
    click(root, '[data-action="open-context"][data-id="rec-0002"]');
    await flush();

    const contexts = service.requests((r) => r.path.endsWith("/context"));
    expect(contexts.length).toBe(1);
    expect(contexts[0].path).toBe("/api/v1/anomalies/rec-0002/context");

    const card = q<HTMLElement>(root, "[data-role=context-card]");
    expect(card.querySelector("[data-role=context-chart]")).not.toBeNull();
    expect(q(card, "[data-role=chart-summary]").textContent)
      .toBe("13 points over 12 h, band z 4.09, tail threshold z_q 6.00");
    expect(card.textContent).toContain("observed");
    expect(card.textContent).toContain("z_q at detection");
    expect(q<HTMLElement>(root, '.queue-row[data-id="rec-0002"]').className)
      .toContain("selected");
  });

  it("shows a retriable error when the context fetch fails", async () => {
    const service = fixtureService();
    const { root } = await mountLoaded(service);
    service.offlineWhen = (req) => req.path.endsWith("/context");
    click(root, '[data-action="open-context"][data-id="rec-0001"]');
    await flush();
    const card = q<HTMLElement>(root, "[data-role=context-card]");
    expect(card.querySelector(".load-error")).not.toBeNull();

    service.offlineWhen = null;
    click(root, "[data-action=context-retry]");
    await flush();
    expect(card.querySelector("[data-role=context-chart]")).not.toBeNull();
  });
});

describe("risk-factor panel", () => {
  it("loads the committed factor and previews the sweep over the grid", async () => {
    const service = fixtureService();
    const { root } = await mountLoaded(service);

    expect(q(root, "[data-role=risk-committed-q]").textContent).toBe("0.998");
    const slider = q<HTMLInputElement>(root, "[data-role=risk-slider]");
    expect(root.querySelectorAll(".preview-row").length)
      .toBe(Number(slider.max) - Number(slider.min) + 1);
    expect(q(root, "[data-role=risk-selected-q]").textContent).toBe("0.998");
    expect(q(root, "[data-role=risk-note]").textContent).toBe("no change");
    expect(q<HTMLButtonElement>(root, "[data-role=risk-apply]").disabled).toBe(true);

    const sweeps = service.requests((r) => r.path === "/api/v1/reports/sweep");
    expect(sweeps.length).toBe(1);
    expect(sweeps[0].query.get("window")).toBe(service.windows[service.windows.length - 1]);
    expect(sweeps[0].query.get("grid")).toContain("0.998");
  });

  it("previews a stricter quantile with a count no larger than the current one", async () => {
    const service = fixtureService();
    const { root } = await mountLoaded(service);
    const committedIdx = Number(q<HTMLInputElement>(root, "[data-role=risk-slider]").value);
    setSlider(root, committedIdx + 1);

    expect(q(root, "[data-role=risk-selected-q]").textContent).toBe("0.999");
    const note = q(root, "[data-role=risk-note]").textContent ?? "";
    const m = note.match(/projected high-tier count (\d+) \(now (\d+)\)/);
    expect(m).not.toBeNull();
    expect(Number(m![1])).toBeLessThanOrEqual(Number(m![2]));
    expect(Number(m![2])).toBe(8);
    expect(q<HTMLButtonElement>(root, "[data-role=risk-apply]").disabled).toBe(false);
  });

  it("applies a stricter quantile with a single PUT on explicit confirm", async () => {
    const service = fixtureService();
    const { root } = await mountLoaded(service);
    const committedIdx = Number(q<HTMLInputElement>(root, "[data-role=risk-slider]").value);
    setSlider(root, committedIdx + 1);
    click(root, "[data-role=risk-apply]");
    await flush();

    const puts = service.requests((r) => r.method === "PUT");
    expect(puts.length).toBe(1);
    expect(puts[0].path).toBe("/api/v1/config/risk-factor");
    expect(puts[0].body).toEqual({ quantile: 0.999 });
    expect(service.riskQ).toBeCloseTo(0.001, 12);

    expect(q(root, "[data-role=risk-committed-q]").textContent).toBe("0.999");
    expect(q(root, "[data-role=risk-note]").textContent).toBe("no change");
    expect(q<HTMLButtonElement>(root, "[data-role=risk-apply]").disabled).toBe(true);
    expect(q(root, "[data-role=risk-notice]").textContent).toContain("applied quantile 0.999");
  });

  it("surfaces a rejected update and snaps back to the committed value", async () => {
    const service = fixtureService();
    service.rejectRiskPut = "risk factor must be in (0, 0.5), got 0.75";
    const { root } = await mountLoaded(service);
    const committedIdx = Number(q<HTMLInputElement>(root, "[data-role=risk-slider]").value);
    setSlider(root, committedIdx + 2);
    click(root, "[data-role=risk-apply]");
    await flush();

    expect(q(root, "[data-role=risk-notice]").textContent)
      .toBe("not applied: risk factor must be in (0, 0.5), got 0.75");
    expect(q<HTMLInputElement>(root, "[data-role=risk-slider]").value)
      .toBe(String(committedIdx));
    expect(q(root, "[data-role=risk-committed-q]").textContent).toBe("0.998");
    expect(q<HTMLButtonElement>(root, "[data-role=risk-apply]").disabled).toBe(true);
    expect(service.riskQ).toBe(0.002);
  });
});

describe("mutation audit", () => {
  it("maps one verdict and one apply to exactly one POST and one PUT", async () => {
    const service = fixtureService();
    const { root } = await mountLoaded(service);

    click(root, '[data-action="verdict"][data-id="rec-0001"][data-verdict="confirmed"]');
    await flush();
    const committedIdx = Number(q<HTMLInputElement>(root, "[data-role=risk-slider]").value);
    setSlider(root, committedIdx + 1);
    click(root, "[data-role=risk-apply]");
    await flush();
    click(root, '[data-action="open-context"][data-id="rec-0001"]');
    await flush();

    expect(service.mutations().map((r) => [r.method, r.path])).toEqual([
      ["POST", "/api/v1/feedback"],
      ["PUT", "/api/v1/config/risk-factor"],
    ]);
  });
});
