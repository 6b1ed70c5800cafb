/* tslint:disable */
/* eslint-disable */

export class Scene {
    free(): void;
    [Symbol.dispose](): void;
    image(): Uint8Array;
    /**
     * `withheld < 0` keeps every class.
     */
    constructor(seed: number, withheld: number);
    segmap(): Uint8Array;
    /**
     * JSON list of `{id, name, pixels}`.
     */
    visible(): string;
    readonly size: number;
}

/**
 * JSON list of `{id, name, color}`.
 */
export function classes(): string;

/**
 * JSON `{n, fsd, mean_term, covariance_term, rows, svg}`.
 */
export function compareStats(n: number, seed: number, withheld: number): string;

/**
 * JSON list of `{n, fsd_split}`.
 */
export function noiseFloor(sizes: Uint32Array, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_scene_free: (a: number, b: number) => void;
    readonly classes: () => [number, number];
    readonly compareStats: (a: number, b: number, c: number) => [number, number, number, number];
    readonly noiseFloor: (a: number, b: number, c: number) => [number, number, number, number];
    readonly scene_image: (a: number) => [number, number];
    readonly scene_new: (a: number, b: number) => [number, number, number];
    readonly scene_segmap: (a: number) => [number, number];
    readonly scene_size: (a: number) => number;
    readonly scene_visible: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
