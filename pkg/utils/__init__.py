# 求解器、实验与工具模块
