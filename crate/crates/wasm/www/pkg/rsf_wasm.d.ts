/* tslint:disable */
/* eslint-disable */

/**
 * Training data plus the most recently grown forest.
 */
export class Session {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Grow on the trial rows and report error curve, minimal depth and VIMP.
     */
    grow(ntree: number, nodesize: number, seed: number): string;
    km(group_var: string, conf: number): string;
    constructor();
    partial(xvar: string, time: number, npts: number): string;
    /**
     * Variable specs of the training data.
     */
    variables(): string;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_session_free: (a: number, b: number) => void;
    readonly session_grow: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly session_km: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly session_new: () => number;
    readonly session_partial: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly session_variables: (a: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
