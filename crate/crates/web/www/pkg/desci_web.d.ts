/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Per-frame PSNR of the last reconstruction.
     */
    frame_psnr(): Float64Array;
    frames(): number;
    mask_rgba(frame: number): Uint8Array;
    /**
     * The snapshot, scaled by its own maximum.
     */
    measurement_rgba(): Uint8Array;
    /**
     * Simulates a moving-squares clip and its coded snapshot. A non-finite
     * `snr_db` means a noiseless measurement.
     */
    constructor(size: number, frames: number, density: number, seed: bigint, snr_db: number);
    /**
     * Empty until a reconstruction has run.
     */
    recon_rgba(frame: number): Uint8Array;
    /**
     * Runs `"gap-tv"` or `"desci"` and returns `[psnr, ssim, iterations]`.
     * `stage_iterations` shortens each DeSCI noise stage.
     */
    reconstruct(algorithm: string, stage_iterations: number): Float64Array;
    size(): number;
    truth_rgba(frame: number): Uint8Array;
}

/**
 * `max(σ_j − σ_n² w_j, 0)` with `w_j = c√M / (σ̂_j + ε)`.
 */
export function shrink_singular_values(singular: Float64Array, m: number, c: number, sigma_n: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_frame_psnr: (a: number) => [number, number];
    readonly demo_frames: (a: number) => number;
    readonly demo_mask_rgba: (a: number, b: number) => [number, number];
    readonly demo_measurement_rgba: (a: number) => [number, number];
    readonly demo_new: (a: number, b: number, c: number, d: bigint, e: number) => [number, number, number];
    readonly demo_recon_rgba: (a: number, b: number) => [number, number];
    readonly demo_reconstruct: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demo_size: (a: number) => number;
    readonly demo_truth_rgba: (a: number, b: number) => [number, number];
    readonly shrink_singular_values: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
