/** Typed client for the gateway's JSON endpoints. */

export interface Service {
  s_id: number;
  name: string;
  rm_id: number;
  rm_ip: string;
  rm_port: number;
}

export interface Machine {
  phy_id: number;
  avail_cpu: number;
  avail_ram: number;
  avail_disk: number;
  netspeed: string;
}

export interface Vm {
  vm_id: number;
  s_id: number;
  phy_id: number;
  vm_local_id: string;
  virt_ip: string;
  status: string;
}

/** The ten execution-status names a VM badge may carry. */
export const STATUS_NAMES = [
  "UNKNOWN", "UNSTARTED", "READY", "STAGING_IN", "RUNNING",
  "SUSPENDED", "STOPPED", "CANCELLED", "FAILED", "ABORTED",
] as const;

/** A non-2xx gateway answer; `code` is the middleware error code. */
export class ApiError extends Error {
  constructor(readonly httpStatus: number, readonly code: number | null) {
    super(code === null ? `HTTP ${httpStatus}` : `error ${code}`);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  if (!response.ok) {
    let code: number | null = null;
    try {
      const body = await response.json();
      if (typeof body?.error === "number") code = body.error;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(response.status, code);
  }
  return (await response.json()) as T;
}

/** What the ViewModel needs from the gateway; `Api` is the real client. */
export interface PortalApi {
  listServices(): Promise<Service[]>;
  listMachines(): Promise<Machine[]>;
  listVms(serviceId?: number): Promise<Vm[]>;
  getVm(vmId: number): Promise<Vm>;
  submitService(serviceId: number): Promise<{ vm_id: number }>;
  stopVm(vmId: number): Promise<{ vm_id: number }>;
}

export class Api implements PortalApi {
  constructor(private readonly base: string = "") {}

  listServices(): Promise<Service[]> {
    return request(`${this.base}/api/services`);
  }

  listMachines(): Promise<Machine[]> {
    return request(`${this.base}/api/machines`);
  }

  listVms(serviceId?: number): Promise<Vm[]> {
    const query = serviceId === undefined ? "" : `?service=${serviceId}`;
    return request(`${this.base}/api/vms${query}`);
  }

  getVm(vmId: number): Promise<Vm> {
    return request(`${this.base}/api/vms/${vmId}`);
  }

  submitService(serviceId: number): Promise<{ vm_id: number }> {
    return request(`${this.base}/api/services/${serviceId}/submit`,
                   { method: "POST" });
  }

  stopVm(vmId: number): Promise<{ vm_id: number }> {
    return request(`${this.base}/api/vms/${vmId}/stop`, { method: "POST" });
  }
}
