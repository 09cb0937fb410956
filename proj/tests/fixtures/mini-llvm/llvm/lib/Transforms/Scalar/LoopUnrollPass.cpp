//===- LoopUnroll.cpp - Loop unroller pass --------------------------------===//

#include "llvm/Transforms/Scalar/LoopUnrollPass.h"

using namespace llvm;

PreservedAnalyses LoopUnrollPass::run(Function &F,
                                      FunctionAnalysisManager &AM) {
  auto &LI = AM.getResult<LoopAnalysis>(F);
  auto &SE = AM.getResult<ScalarEvolutionAnalysis>(F);
  auto &TTI = AM.getResult<TargetIRAnalysis>(F);
  auto &DT = AM.getResult<DominatorTreeAnalysis>(F);
  auto &AC = AM.getResult<AssumptionAnalysis>(F);

  bool Changed = false;
  for (auto &L : LI)
    Changed |= tryToUnrollLoop(L, DT, &LI, SE, TTI, AC, Opts) != LoopUnrollResult::Unmodified;
  return Changed ? getLoopPassPreservedAnalyses() : PreservedAnalyses::all();
}
