export * from './schema';
export * from './transform';
export * from './scene';
export * from './messages';
export * from './drag';
export * from './render';
export * from './client';
