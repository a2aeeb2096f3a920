/* tslint:disable */
/* eslint-disable */

/**
 * Radial function at the primal direction sitting at fraction `angle_frac`
 * of the Omega_C arc, against the solved pseudo-cone.
 */
export function demo_probe_radial(m_lambda: number, m_mu: number, seed: bigint, log_radii: Float64Array, angle_frac: number): string;

/**
 * Reverse radial Gauss map at the dual direction sitting at fraction
 * `angle_frac` of the Omega_{C°} arc, against the solved pseudo-cone.
 */
export function demo_probe_support(m_lambda: number, m_mu: number, seed: bigint, log_radii: Float64Array, angle_frac: number): string;

/**
 * Generate a balanced planar instance, solve it, and return the drawing
 * scene as JSON.
 */
export function demo_solve(m_lambda: number, m_mu: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly demo_probe_radial: (a: number, b: number, c: bigint, d: number, e: number, f: number) => [number, number];
    readonly demo_probe_support: (a: number, b: number, c: bigint, d: number, e: number, f: number) => [number, number];
    readonly demo_solve: (a: number, b: number, c: bigint) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
