/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const demo_probe_radial: (a: number, b: number, c: bigint, d: number, e: number, f: number) => [number, number];
export const demo_probe_support: (a: number, b: number, c: bigint, d: number, e: number, f: number) => [number, number];
export const demo_solve: (a: number, b: number, c: bigint) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
