/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const epsilon_table: (a: number, b: number) => [number, number, number, number];
export const euler_stability_radius: (a: number) => number;
export const parareal_errors: (a: number, b: number) => [number, number, number, number];
export const phase_portrait: (a: number, b: number, c: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
