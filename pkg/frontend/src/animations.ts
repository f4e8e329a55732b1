// Placeholder animation assets: one keyframed pose sequence per action
// id, applied to the puppet element. Swap entries here for real artwork
// later; anything missing falls back to GENERIC.

export interface ActionAnimation {
  keyframes: Keyframe[];
  options: KeyframeAnimationOptions;
  emoji: string;
}

const quick: KeyframeAnimationOptions = { duration: 900, easing: "ease-in-out" };
const slow: KeyframeAnimationOptions = { duration: 1400, easing: "ease-in-out" };

export const GENERIC: ActionAnimation = {
  keyframes: [
    { transform: "scale(1)" },
    { transform: "scale(1.15)" },
    { transform: "scale(1)" },
  ],
  options: quick,
  emoji: "*",
};

export const ANIMATIONS: Record<string, ActionAnimation> = {
  "throw-heart": {
    keyframes: [
      { transform: "translateY(0) rotate(0deg)" },
      { transform: "translateY(-18px) rotate(-12deg)" },
      { transform: "translateY(0) rotate(0deg)" },
    ],
    options: quick,
    emoji: "❤️",
  },
  "catch-heart": {
    keyframes: [
      { transform: "translateY(0) scale(1)" },
      { transform: "translateY(-10px) scale(1.2)" },
      { transform: "translateY(0) scale(1)" },
    ],
    options: quick,
    emoji: "🫶",
  },
  "carry-heart": {
    keyframes: [
      { transform: "translateX(0)" },
      { transform: "translateX(8px) translateY(-6px)" },
      { transform: "translateX(0)" },
    ],
    options: slow,
    emoji: "💗",
  },
  "split-heart": {
    keyframes: [
      { transform: "scale(1)" },
      { transform: "scale(1.25)" },
      { transform: "scale(0.9)" },
      { transform: "scale(1)" },
    ],
    options: quick,
    emoji: "💕",
  },
  "throw-back-heart": {
    keyframes: [
      { transform: "translateY(0) rotate(0deg)" },
      { transform: "translateY(-18px) rotate(12deg)" },
      { transform: "translateY(0) rotate(0deg)" },
    ],
    options: quick,
    emoji: "💞",
  },
  hug: {
    keyframes: [
      { transform: "translateX(0) scale(1)" },
      { transform: "translateX(-12px) scale(1.1)" },
      { transform: "translateX(0) scale(1)" },
    ],
    options: slow,
    emoji: "🤗",
  },
  "knees-hug": {
    keyframes: [
      { transform: "translateY(0) scale(1)" },
      { transform: "translateY(12px) scale(0.8)" },
      { transform: "translateY(12px) scale(0.8)" },
      { transform: "translateY(0) scale(1)" },
    ],
    options: slow,
    emoji: "🫣",
  },
  "pat-shoulder": {
    keyframes: [
      { transform: "rotate(0deg)" },
      { transform: "rotate(8deg)" },
      { transform: "rotate(0deg)" },
      { transform: "rotate(8deg)" },
      { transform: "rotate(0deg)" },
    ],
    options: quick,
    emoji: "🫳",
  },
  cry: {
    keyframes: [
      { transform: "translateY(0)", opacity: 1 },
      { transform: "translateY(6px)", opacity: 0.7 },
      { transform: "translateY(0)", opacity: 1 },
    ],
    options: slow,
    emoji: "😭",
  },
  "wipe-own-tears": {
    keyframes: [
      { transform: "rotate(0deg)" },
      { transform: "rotate(-6deg)" },
      { transform: "rotate(6deg)" },
      { transform: "rotate(0deg)" },
    ],
    options: quick,
    emoji: "🥲",
  },
  "wipe-others-tears": {
    keyframes: [
      { transform: "translateX(0)" },
      { transform: "translateX(-14px)" },
      { transform: "translateX(-14px) rotate(-6deg)" },
      { transform: "translateX(0)" },
    ],
    options: slow,
    emoji: "🧦",
  },
  "hit-with-object": {
    keyframes: [
      { transform: "rotate(0deg)" },
      { transform: "rotate(-20deg)" },
      { transform: "rotate(14deg)" },
      { transform: "rotate(0deg)" },
    ],
    options: quick,
    emoji: "🔨",
  },
  agony: {
    keyframes: [
      { transform: "rotate(0deg) translateY(0)" },
      { transform: "rotate(90deg) translateY(10px)" },
      { transform: "rotate(88deg) translateY(10px)" },
      { transform: "rotate(0deg) translateY(0)" },
    ],
    options: slow,
    emoji: "😵",
  },
  "high-five": {
    keyframes: [
      { transform: "translateY(0) rotate(0deg)" },
      { transform: "translateY(-16px) rotate(10deg)" },
      { transform: "translateY(0) rotate(0deg)" },
    ],
    options: quick,
    emoji: "🖐️",
  },
  "fan-self": {
    keyframes: [
      { transform: "rotate(0deg)" },
      { transform: "rotate(5deg)" },
      { transform: "rotate(-5deg)" },
      { transform: "rotate(5deg)" },
      { transform: "rotate(0deg)" },
    ],
    options: quick,
    emoji: "🫠",
  },
  "take-photo": {
    keyframes: [
      { transform: "scale(1)", opacity: 1 },
      { transform: "scale(1.05)", opacity: 0.4 },
      { transform: "scale(1)", opacity: 1 },
    ],
    options: quick,
    emoji: "📸",
  },
  vomit: {
    keyframes: [
      { transform: "translateY(0) rotate(0deg)" },
      { transform: "translateY(8px) rotate(18deg)" },
      { transform: "translateY(8px) rotate(18deg)" },
      { transform: "translateY(0) rotate(0deg)" },
    ],
    options: quick,
    emoji: "🤮",
  },
};

export function animationFor(actionId: string): { animation: ActionAnimation; generic: boolean } {
  const found = ANIMATIONS[actionId];
  if (found) return { animation: found, generic: false };
  return { animation: GENERIC, generic: true };
}
