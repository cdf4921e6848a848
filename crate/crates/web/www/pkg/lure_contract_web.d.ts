/* tslint:disable */
/* eslint-disable */

/**
 * Evaluates the discrete-time Lipschitz synthesis inequality of the
 * reference plant at `W = diag(w)`, `Z`, `K_Ψ`.
 */
export function audit_witness(w1: number, w2: number, w3: number, z1: number, z2: number, z3: number, k_psi: number, eta: number): string;

/**
 * Simulates the reference loop under gains `(k, k_psi)` for all three
 * example nonlinearities and returns the x1 plot plus P-distance ratios.
 */
export function simulate_reference(k1: number, k2: number, k3: number, k_psi: number, steps: number): string;

/**
 * Solves the synthesis inequality of the reference plant for a chosen
 * contraction factor and Lipschitz constant.
 */
export function synthesize_reference(eta: number, rho: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly audit_witness: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number];
    readonly simulate_reference: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly synthesize_reference: (a: number, b: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
