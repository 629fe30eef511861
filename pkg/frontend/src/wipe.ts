/** Geometry for the wipe comparison: two pixel-aligned layers, the top one
 * (the right-hand image) clipped at a draggable divider.
 *
 * ``position`` is the revealed fraction of the right image: 0 shows only
 * the left image, 1 only the right. The divider sits at the reveal edge.
 */

export interface WipeLayout {
  /** CSS clip-path inset for the right-hand (top) layer */
  rightClip: string;
  /** divider x offset in pixels from the left edge */
  dividerX: number;
}

export function wipeLayout(position: number, widthPx: number): WipeLayout {
  const revealed = Math.min(1, Math.max(0, position));
  const hiddenFromLeft = (1 - revealed) * 100;
  return {
    rightClip: `inset(0 0 0 ${hiddenFromLeft.toFixed(4)}%)`,
    dividerX: Math.round((1 - revealed) * widthPx),
  };
}

export function positionFromPointer(clientX: number, rect: { left: number; width: number }): number {
  if (rect.width <= 0) return 0;
  const dividerFraction = Math.min(1, Math.max(0, (clientX - rect.left) / rect.width));
  return 1 - dividerFraction;
}
