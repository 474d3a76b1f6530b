/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const compare_partitions: (a: number, b: number, c: number, d: number) => [number, number];
export const fit_text: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number];
export const simulate_and_fit: (a: number, b: number, c: number, d: bigint, e: number, f: number, g: number, h: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
