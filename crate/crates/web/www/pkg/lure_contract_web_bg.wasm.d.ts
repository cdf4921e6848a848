/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const audit_witness: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number];
export const simulate_reference: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const synthesize_reference: (a: number, b: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
