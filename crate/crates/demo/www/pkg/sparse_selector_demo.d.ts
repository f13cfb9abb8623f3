/* tslint:disable */
/* eslint-disable */

/**
 * A generated scene plus the operations the page exposes.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Per-class box counts.
     */
    classCounts(): Uint32Array;
    /**
     * Scene extent `[x_min, x_max, y_min, y_max]`.
     */
    extent(): Float64Array;
    /**
     * Box footprints as flat `x0, y0, ..., x3, y3, class` groups.
     */
    footprints(): Float64Array;
    /**
     * `[rows, cols]` of a grid named `bev` or `camera:<k>`.
     */
    gridDims(grid: string): Uint32Array;
    /**
     * Supervision mask as RGBA.
     */
    maskRgba(grid: string): Uint8Array;
    /**
     * Scene with `boxes` boxes over two classes, the second with share `rare`.
     */
    constructor(seed: bigint, boxes: number, rare: number);
    /**
     * Anchors for one camera cell: flat `x, y, z, clamped` quadruples, `d`
     * camera anchors followed by `d` BEV anchors.
     */
    rayAnchors(camera: number, i: number, j: number, d: number): Float64Array;
    /**
     * Token selection overlay as RGBA; summary via [`Demo::select_summary`].
     */
    selectRgba(grid: string, rho: number, lambda: number, sigma: number, seed: bigint): Uint8Array;
    /**
     * Text summary of the same selection.
     */
    selectSummary(grid: string, rho: number, lambda: number, sigma: number, seed: bigint): string;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_classCounts: (a: number) => [number, number];
    readonly demo_extent: (a: number) => [number, number];
    readonly demo_footprints: (a: number) => [number, number];
    readonly demo_gridDims: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_maskRgba: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_new: (a: bigint, b: number, c: number) => [number, number, number];
    readonly demo_rayAnchors: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly demo_selectRgba: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number, number];
    readonly demo_selectSummary: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number, number];
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
