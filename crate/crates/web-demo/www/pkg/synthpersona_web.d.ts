/* tslint:disable */
/* eslint-disable */

/**
 * Items and response options of the demo questionnaire.
 */
export function demo_items(): string;

/**
 * α, λ6 and ω for a tab- or comma-separated item matrix with a header row.
 */
export function reliability(table: string): string;

/**
 * Subscale scores for comma-separated answers to the demo items, in item order.
 */
export function score_demo(answers: string): string;

/**
 * Persona text, a sample prompt and simulated domain scores for a shaping
 * code such as `70000` (one domain at level 7) or `19191` (all at extremes).
 */
export function shape(code: string, sigma: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly demo_items: () => [number, number];
    readonly reliability: (a: number, b: number) => [number, number, number, number];
    readonly score_demo: (a: number, b: number) => [number, number, number, number];
    readonly shape: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
