/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_frame_psnr: (a: number) => [number, number];
export const demo_frames: (a: number) => number;
export const demo_mask_rgba: (a: number, b: number) => [number, number];
export const demo_measurement_rgba: (a: number) => [number, number];
export const demo_new: (a: number, b: number, c: number, d: bigint, e: number) => [number, number, number];
export const demo_recon_rgba: (a: number, b: number) => [number, number];
export const demo_reconstruct: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const demo_size: (a: number) => number;
export const demo_truth_rgba: (a: number, b: number) => [number, number];
export const shrink_singular_values: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
