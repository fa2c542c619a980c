/**
 * Pure HTML-string rendering of the portal state.  Keeping this free of
 * DOM access lets the unit tests assert on markup without a browser.
 */

import { Machine, Service, Vm } from "./api.js";
import { PortalState } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Gauge width in percent; display-only clamp, the label stays verbatim. */
export function gaugePercent(value: number, max: number): number {
  if (!(max > 0)) return 0;
  return Math.min(100, Math.max(0, (value / max) * 100));
}

export function renderService(
    service: Service, pending: ReadonlySet<string>): string {
  const key = `submit:${service.s_id}`;
  const busy = pending.has(key);
  return `<tr data-sid="${service.s_id}">` +
    `<td>${service.s_id}</td>` +
    `<td>${escapeHtml(service.name)}</td>` +
    `<td>${escapeHtml(service.rm_ip)}:${service.rm_port}</td>` +
    `<td><button class="submit" data-sid="${service.s_id}"` +
    `${busy ? " disabled" : ""}>${busy ? "submitting…" : "submit"}` +
    `</button></td></tr>`;
}

export function renderMachine(machine: Machine): string {
  const cpu = machine.avail_cpu;
  const gauge = (value: number, max: number, label: string) =>
    `<div class="gauge"><div class="fill" style="width:` +
    `${gaugePercent(value, max)}%"></div><span>${label}</span></div>`;
  return `<tr data-phy="${machine.phy_id}">` +
    `<td>${machine.phy_id}</td>` +
    `<td>${gauge(cpu, Math.max(cpu, 1), `${cpu} cpu`)}</td>` +
    `<td>${gauge(machine.avail_ram, 1, `ram ${machine.avail_ram}`)}</td>` +
    `<td>${gauge(machine.avail_disk, 1, `disk ${machine.avail_disk}`)}</td>` +
    `<td>${escapeHtml(machine.netspeed)}</td></tr>`;
}

export function renderVm(vm: Vm, pending: ReadonlySet<string>): string {
  const busy = pending.has(`stop:${vm.vm_id}`);
  const stoppable = vm.status === "RUNNING" || vm.status === "SUSPENDED";
  const button = stoppable
    ? `<button class="stop" data-vmid="${vm.vm_id}"` +
      `${busy ? " disabled" : ""}>${busy ? "stopping…" : "stop"}</button>`
    : "";
  return `<tr data-vmid="${vm.vm_id}">` +
    `<td>${vm.vm_id}</td>` +
    `<td>${vm.s_id}</td>` +
    `<td>${vm.phy_id}</td>` +
    `<td>${escapeHtml(vm.vm_local_id)}</td>` +
    `<td>${escapeHtml(vm.virt_ip)}</td>` +
    `<td><span class="badge status-${escapeHtml(vm.status)}">` +
    `${escapeHtml(vm.status)}</span></td>` +
    `<td>${button}</td></tr>`;
}

function pane(title: string, headers: string[], rows: string[],
              empty: string): string {
  const body = rows.length > 0
    ? rows.join("")
    : `<tr><td class="empty" colspan="${headers.length}">` +
      `${escapeHtml(empty)}</td></tr>`;
  return `<section><h2>${escapeHtml(title)}</h2><table><thead><tr>` +
    headers.map((h) => `<th>${escapeHtml(h)}</th>`).join("") +
    `</tr></thead><tbody>${body}</tbody></table></section>`;
}

export function render(state: PortalState): string {
  const banner = state.error === null
    ? ""
    : `<div class="banner error">${escapeHtml(state.error)}</div>`;
  const toast = state.toast === null
    ? ""
    : `<div class="toast">${escapeHtml(state.toast)}</div>`;
  return banner + toast +
    pane("Services", ["id", "name", "repository", ""],
         state.services.map((s) => renderService(s, state.pending)),
         "no services registered") +
    pane("Machines", ["id", "cpu", "ram", "disk", "net"],
         state.machines.map(renderMachine),
         "no machines registered") +
    pane("Virtual machines",
         ["id", "service", "machine", "local id", "ip", "status", ""],
         state.vms.map((vm) => renderVm(vm, state.pending)),
         "no virtual machines");
}
