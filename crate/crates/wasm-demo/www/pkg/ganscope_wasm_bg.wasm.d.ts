/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_scene_free: (a: number, b: number) => void;
export const classes: () => [number, number];
export const compareStats: (a: number, b: number, c: number) => [number, number, number, number];
export const noiseFloor: (a: number, b: number, c: number) => [number, number, number, number];
export const scene_image: (a: number) => [number, number];
export const scene_new: (a: number, b: number) => [number, number, number];
export const scene_segmap: (a: number) => [number, number];
export const scene_size: (a: number) => number;
export const scene_visible: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
