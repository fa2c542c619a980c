/**
 * ViewModel for the portal: holds the last snapshot fetched from the
 * gateway, coalesces polls, tracks in-flight actions and surfaces errors.
 * No DOM access — rendering is a pure function over this state.
 */

import { ApiError, Machine, PortalApi, Service, Vm } from "./api.js";

export interface PortalState {
  services: Service[];
  machines: Machine[];
  vms: Vm[];
  /** Keys like "submit:3" / "stop:7" for actions awaiting a reply. */
  pending: ReadonlySet<string>;
  /** Banner shown when a refresh fails (gateway unreachable etc.). */
  error: string | null;
  /** Transient message from the last action (success or failure). */
  toast: string | null;
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    return err.code === null
      ? `gateway error (HTTP ${err.httpStatus})`
      : `error ${err.code} (HTTP ${err.httpStatus})`;
  }
  return "gateway unreachable";
}

export class ViewModel {
  private services: Service[] = [];
  private machines: Machine[] = [];
  private vms = new Map<number, Vm>();
  private pending = new Set<string>();
  private error: string | null = null;
  private toast: string | null = null;
  private refreshPromise: Promise<void> | null = null;

  constructor(
    private readonly api: PortalApi,
    private readonly onChange: (state: PortalState) => void = () => {},
  ) {}

  get state(): PortalState {
    return {
      services: this.services,
      machines: this.machines,
      vms: [...this.vms.values()].sort((a, b) => a.vm_id - b.vm_id),
      pending: new Set(this.pending),
      error: this.error,
      toast: this.toast,
    };
  }

  private notify(): void {
    this.onChange(this.state);
  }

  /**
   * Fetch services, machines and VMs.  Overlapping calls coalesce: a poll
   * arriving while one is in flight awaits the in-flight fetch instead of
   * starting another.
   */
  refresh(): Promise<void> {
    if (this.refreshPromise === null) {
      this.refreshPromise = this.doRefresh()
        .finally(() => { this.refreshPromise = null; });
    }
    return this.refreshPromise;
  }

  private async doRefresh(): Promise<void> {
    try {
      const [services, machines, listed] = await Promise.all([
        this.api.listServices(),
        this.api.listMachines(),
        this.api.listVms(),
      ]);
      this.services = services;
      this.machines = machines;
      const seen = new Set<number>();
      for (const vm of listed) {
        this.vms.set(vm.vm_id, vm);
        seen.add(vm.vm_id);
      }
      // VMs that were stopped drop out of the listing but remain queryable;
      // fetch them individually so their final badge stays visible.
      const vanished = [...this.vms.keys()].filter((id) => !seen.has(id));
      await Promise.all(vanished.map(async (id) => {
        try {
          this.vms.set(id, await this.api.getVm(id));
        } catch {
          this.vms.delete(id); // gone for good
        }
      }));
      this.error = null;
    } catch (err) {
      this.error = describeError(err);
    } finally {
      this.notify();
    }
  }

  async submit(serviceId: number): Promise<void> {
    await this.runAction(`submit:${serviceId}`, async () => {
      const { vm_id } = await this.api.submitService(serviceId);
      this.toast = `submitted service ${serviceId} as VM ${vm_id}`;
    });
  }

  async stop(vmId: number): Promise<void> {
    await this.runAction(`stop:${vmId}`, async () => {
      await this.api.stopVm(vmId);
      this.toast = `stopped VM ${vmId}`;
    });
  }

  private async runAction(key: string, body: () => Promise<void>):
      Promise<void> {
    if (this.pending.has(key)) return;
    this.pending.add(key);
    this.notify();
    try {
      await body();
    } catch (err) {
      this.toast = describeError(err);
    } finally {
      this.pending.delete(key);
    }
    await this.refresh();
  }
}
