import { describe, expect, it } from "vitest";

import { parseHash } from "../src/main.js";

describe("parseHash", () => {
  it("parses a unit route", () => {
    expect(parseHash("#/course/eng-py/unit/arrays-basics")).toEqual({
      courseId: "eng-py",
      unitId: "arrays-basics",
      gradebook: false,
    });
  });

  it("parses a gradebook route", () => {
    expect(parseHash("#/course/eng-py/gradebook")).toEqual({
      courseId: "eng-py",
      unitId: null,
      gradebook: true,
    });
  });

  it("falls back to home for anything else", () => {
    for (const hash of ["", "#", "#/", "#/nonsense", "#/course"]) {
      expect(parseHash(hash)).toEqual({ courseId: null, unitId: null, gradebook: false });
    }
  });

  it("decodes escaped ids", () => {
    expect(parseHash("#/course/c%20one/unit/u%2F1")).toEqual({
      courseId: "c one",
      unitId: "u/1",
      gradebook: false,
    });
  });

  it("treats a course without a unit as course home", () => {
    expect(parseHash("#/course/eng-py")).toEqual({
      courseId: "eng-py",
      unitId: null,
      gradebook: false,
    });
  });
});
