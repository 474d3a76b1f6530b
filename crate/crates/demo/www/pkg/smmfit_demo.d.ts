/* tslint:disable */
/* eslint-disable */

/**
 * RI and ARI between two label lists separated by commas or whitespace.
 */
export function compare_partitions(a: string, b: string): string;

/**
 * Fit a pasted sequence over `alphabet` at order `m`; returns the selected
 * partition as context groups plus the penalty path.
 */
export function fit_text(text: string, alphabet: string, m: number, weights: string, knn: number, phi: number): string;

/**
 * Simulate a chain, fit the penalty path and compare with the truth.
 * `weights` is `uniform`, `l2` (Gaussian kNN) or `linf` (exponential kNN).
 */
export function simulate_and_fit(setup: number, m: number, n: number, seed: bigint, weights: string, knn: number, phi: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly compare_partitions: (a: number, b: number, c: number, d: number) => [number, number];
    readonly fit_text: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number];
    readonly simulate_and_fit: (a: number, b: number, c: number, d: bigint, e: number, f: number, g: number, h: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
